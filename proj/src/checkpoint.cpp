#include "fedgkd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "fedgkd/error.hpp"

namespace fedgkd {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t h) {
  for (auto b : bytes) {
    h ^= static_cast<std::uint64_t>(b);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xf];
  return s;
}

std::string encode_checkpoint(const ModelParams& params) {
  const Vector flat = params.flatten();
  const auto payload = std::as_bytes(std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())));
  nlohmann::json header = {
      {"format", "fedgkd-params-v1"},
      {"dtype", "float64-le"},
      {"order", "column-major"},
      {"shapes",
       {{"W1", {params.W1.rows(), params.W1.cols()}},
        {"W2", {params.W2.rows(), params.W2.cols()}},
        {"W_out", {params.W_out.rows(), params.W_out.cols()}},
        {"b_out", {params.b_out.size()}}}},
      {"count", flat.size()},
      {"fnv1a64", hex64(fnv1a64(payload))},
  };
  std::string out = header.dump();
  out.push_back('\n');
  out.append(reinterpret_cast<const char*>(payload.data()), payload.size());
  return out;
}

ModelParams decode_checkpoint(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) throw InputError("checkpoint: missing header");
  auto header = nlohmann::json::parse(bytes.substr(0, nl), nullptr, false);
  if (header.is_discarded() || header.value("format", "") != "fedgkd-params-v1") {
    throw InputError("checkpoint: bad header");
  }
  const auto& sh = header["shapes"];
  ModelParams p(sh["W1"][0].get<int>(), sh["W1"][1].get<int>(), sh["W_out"][1].get<int>());
  const auto count = header["count"].get<std::size_t>();
  if (count != p.size()) throw InputError("checkpoint: count does not match shapes");
  if (bytes.size() - nl - 1 != count * sizeof(double)) throw InputError("checkpoint: truncated payload");
  Vector flat(static_cast<Eigen::Index>(count));
  std::memcpy(flat.data(), bytes.data() + nl + 1, count * sizeof(double));
  const auto payload = std::as_bytes(std::span<const double>(flat.data(), count));
  if (hex64(fnv1a64(payload)) != header["fnv1a64"].get<std::string>()) {
    throw InputError("checkpoint: hash mismatch");
  }
  p.unflatten(flat);
  return p;
}

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  const auto bytes = encode_checkpoint(params);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace fedgkd

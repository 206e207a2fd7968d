#include "fedgkd/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "fedgkd/error.hpp"

namespace fedgkd {
namespace {

namespace fs = std::filesystem;

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open " + p.string());
  return in;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void parse_fail(const fs::path& p, std::size_t line, const std::string& what) {
  throw InputError(p.filename().string() + ":" + std::to_string(line) + ": " + what);
}

template <typename T>
T parse_number(std::string_view tok, const fs::path& p, std::size_t line) {
  tok = trim(tok);
  T v{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    parse_fail(p, line, "cannot parse '" + std::string(tok) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

bool blank(std::string_view s) { return trim(s).empty(); }

}  // namespace

Graph load_dataset(const std::filesystem::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("dataset directory not found: " + dir.string());

  // features.csv defines N.
  std::vector<std::vector<double>> rows;
  {
    const auto p = dir / "features.csv";
    auto in = open_in(p);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (blank(line)) continue;
      std::vector<double> r;
      for (auto tok : split(line, ',')) r.push_back(parse_number<double>(tok, p, ln));
      if (!rows.empty() && r.size() != rows.front().size()) {
        parse_fail(p, ln, "expected " + std::to_string(rows.front().size()) + " columns, got " +
                              std::to_string(r.size()));
      }
      rows.push_back(std::move(r));
    }
  }
  const int n = static_cast<int>(rows.size());
  const int dim = rows.empty() ? 0 : static_cast<int>(rows.front().size());
  Matrix features(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) features(i, j) = rows[i][j];
  rows.clear();

  std::vector<int> labels;
  {
    const auto p = dir / "labels.csv";
    auto in = open_in(p);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (blank(line)) continue;
      labels.push_back(parse_number<int>(line, p, ln));
    }
  }
  if (static_cast<int>(labels.size()) != n) {
    throw InputError("labels.csv has " + std::to_string(labels.size()) + " rows but features.csv has " +
                     std::to_string(n));
  }

  int num_classes = 0;
  for (int y : labels) num_classes = std::max(num_classes, y + 1);
  if (fs::exists(dir / "meta.json")) {
    std::ifstream in(dir / "meta.json");
    auto meta = nlohmann::json::parse(in, nullptr, false);
    if (meta.is_discarded() || !meta.contains("num_classes")) {
      throw InputError("meta.json must be an object with num_classes");
    }
    const int declared = meta["num_classes"].get<int>();
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= declared) {
        throw InputError("labels.csv:" + std::to_string(i + 1) + ": label " + std::to_string(labels[i]) +
                         " >= declared num_classes " + std::to_string(declared));
      }
    }
    num_classes = declared;
  }

  Masks masks;
  {
    const auto p = dir / "masks.csv";
    auto in = open_in(p);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (blank(line)) continue;
      if (ln == 1 && trim(line).starts_with("train")) continue;
      auto cols = split(line, ',');
      if (cols.size() != 3) parse_fail(p, ln, "expected 3 columns");
      bool b[3];
      for (int k = 0; k < 3; ++k) {
        const int v = parse_number<int>(cols[k], p, ln);
        if (v != 0 && v != 1) parse_fail(p, ln, "mask values must be 0 or 1");
        b[k] = v == 1;
      }
      if (int(b[0]) + int(b[1]) + int(b[2]) > 1) parse_fail(p, ln, "overlapping masks");
      masks.train.push_back(b[0]);
      masks.val.push_back(b[1]);
      masks.test.push_back(b[2]);
    }
  }
  if (static_cast<int>(masks.train.size()) != n) {
    throw InputError("masks.csv has " + std::to_string(masks.train.size()) + " rows but features.csv has " +
                     std::to_string(n));
  }

  std::vector<Edge> edges;
  {
    const auto p = dir / "edges.tsv";
    auto in = open_in(p);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
      ++ln;
      if (blank(line) || trim(line).front() == '#') continue;
      auto toks = split_ws(line);
      if (toks.size() != 2) parse_fail(p, ln, "expected two node ids");
      const int u = parse_number<int>(toks[0], p, ln);
      const int v = parse_number<int>(toks[1], p, ln);
      if (u < 0 || v < 0 || u >= n || v >= n) {
        parse_fail(p, ln, "node id out of range [0, " + std::to_string(n) + ")");
      }
      edges.emplace_back(u, v);
    }
  }

  return Graph(n, std::move(edges), std::move(features), std::move(labels), num_classes, std::move(masks));
}

void save_dataset(const Graph& g, const std::filesystem::path& dir) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "edges.tsv");
    for (const auto& [u, v] : g.edges()) out << u << '\t' << v << '\n';
  }
  {
    std::ofstream out(dir / "features.csv");
    out.imbue(std::locale::classic());
    out << std::setprecision(17);
    const auto& x = g.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j) out << ',';
        out << x(i, j);
      }
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "labels.csv");
    for (int y : g.labels()) out << y << '\n';
  }
  {
    std::ofstream out(dir / "masks.csv");
    out << "train,val,test\n";
    const auto& m = g.masks();
    for (int i = 0; i < g.num_nodes(); ++i) {
      out << int(m.train[i]) << ',' << int(m.val[i]) << ',' << int(m.test[i]) << '\n';
    }
  }
  {
    std::ofstream out(dir / "meta.json");
    out << nlohmann::json{{"num_classes", g.num_classes()}}.dump() << '\n';
  }
}

std::vector<int> load_partition_file(const std::filesystem::path& path, int num_nodes) {
  auto in = open_in(path);
  std::vector<int> parts;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (blank(line)) continue;
    const int p = parse_number<int>(line, path, ln);
    if (p < 0) parse_fail(path, ln, "negative part id");
    parts.push_back(p);
  }
  if (static_cast<int>(parts.size()) != num_nodes) {
    throw InputError("partition file has " + std::to_string(parts.size()) + " entries, expected " +
                     std::to_string(num_nodes));
  }
  return parts;
}

void save_partition_file(const std::vector<int>& parts, const std::filesystem::path& path) {
  std::ofstream out(path);
  for (int p : parts) out << p << '\n';
}

}  // namespace fedgkd

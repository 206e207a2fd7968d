#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedgkd {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a tuple of
/// coordinates, e.g. (round, client_id, purpose). Order matters.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> coords) {
  std::uint64_t h = mix64(base);
  for (auto c : coords) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

// Stream tags for derive_seed.
enum class Stream : std::uint64_t {
  kInit = 1,
  kTrain = 2,
  kDistill = 3,
  kDistillInit = 4,
  kSplit = 5,
  kFinalSample = 6,
};

inline std::uint64_t derive_seed(std::uint64_t base, Stream s, std::initializer_list<std::uint64_t> coords = {}) {
  std::uint64_t h = derive_seed(base, {static_cast<std::uint64_t>(s)});
  for (auto c : coords) h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

/// Uniform draw on the open interval (0, 1).
inline double open_uniform(Rng& rng) {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

/// Standard Gumbel draw: -log(-log(U)).
inline double standard_gumbel(Rng& rng) {
  return -std::log(-std::log(open_uniform(rng)));
}

}  // namespace fedgkd

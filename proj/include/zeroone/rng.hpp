#pragma once

// Counter-based seeding. Every Monte Carlo draw is a pure function of
// (master_seed, stream, sample_index, key), so results never depend on the
// order in which samples are evaluated.

#include <cstdint>
#include <string_view>

#include "zeroone/rational.hpp"

namespace zeroone::rng {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// FNV-1a; stable across platforms and runs.
constexpr std::uint64_t stream_hash(std::string_view id) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char c : id) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t stream,
                                    std::uint64_t sample_index) noexcept {
  return mix64(mix64(master_seed ^ mix64(stream)) ^ mix64(sample_index + 0x632be59bd9b4e019ull));
}

/// Independent 64-bit value for `key` under a per-sample seed.
constexpr std::uint64_t keyed(std::uint64_t seed, std::uint64_t key) noexcept {
  return mix64(seed ^ mix64(key ^ 0xd1b54a32d192ed03ull));
}

/// Top 53 bits, i.e. a uniform integer in [0, 2^53).
constexpr std::uint64_t uniform53(std::uint64_t bits) noexcept { return bits >> 11; }

inline constexpr std::uint64_t two53 = 1ull << 53;

/// ceil(p * 2^53) for p in [0,1]; an event "uniform53 < threshold" then has
/// probability threshold / 2^53, which equals p whenever p is a dyadic with at
/// most 53 fractional bits and is within 2^-53 of p otherwise.
inline std::uint64_t bernoulli_threshold(const Rational& p) {
  if (!in_closed_unit(p)) throw InvalidArgument("probability outside [0,1]");
  return ceil_rational(p * Rational(Index(two53))).convert_to<std::uint64_t>();
}

/// Exact probability realized by a threshold.
inline Rational threshold_probability(std::uint64_t threshold) {
  return Rational(Index(threshold), Index(two53));
}

/// Sequential SplitMix64 engine.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t operator()() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  using result_type = std::uint64_t;
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

 private:
  std::uint64_t state_;
};

}  // namespace zeroone::rng

#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace netgate {

// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds a sequence of tags into one key. Order-sensitive, so
// derive_key(s, {1, 2}) and derive_key(s, {2, 1}) are different streams.
constexpr std::uint64_t derive_key(std::uint64_t seed,
                                   std::initializer_list<std::uint64_t> tags) noexcept {
  std::uint64_t key = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (std::uint64_t t : tags) key = mix64(key ^ mix64(t + 0x3c6ef372fe94f82bULL));
  return key;
}

// Uniform in [0, 1) with 53 random bits.
constexpr double to_unit_interval(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

// Counter-based generator: output k is mix64(key + k * golden). Two streams
// with different keys never share state, so replicate r of a campaign draws
// the same numbers whichever worker runs it.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t key) noexcept : key_(key) {}
  constexpr Stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) noexcept
      : key_(derive_key(seed, tags)) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * (counter_++));
  }

  constexpr double uniform() noexcept { return to_unit_interval((*this)()); }

  // Uniform integer in [0, bound). Lemire's multiply-shift; the bias is below
  // 2^-64 * bound, irrelevant at the sizes used here.
  std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>((*this)()) * bound) >> 64);
  }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace netgate

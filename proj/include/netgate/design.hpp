#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "netgate/error.hpp"
#include "netgate/random.hpp"

namespace netgate {

// Binary assignment vector with the design probability it was drawn under.
// pi is 0 or 1 for the global counterfactual vectors.
class TreatmentVector {
 public:
  TreatmentVector() = default;
  TreatmentVector(std::vector<std::uint8_t> w, double pi) : w_(std::move(w)), pi_(pi) {
    for (auto& x : w_)
      if (x > 1) throw InvalidParameter("treatment entries must be 0 or 1");
    n1_ = static_cast<std::size_t>(std::accumulate(w_.begin(), w_.end(), std::size_t{0}));
  }

  std::size_t size() const noexcept { return w_.size(); }
  std::uint8_t operator[](std::size_t i) const noexcept { return w_[i]; }
  std::span<const std::uint8_t> values() const noexcept { return w_; }
  double pi() const noexcept { return pi_; }
  std::size_t n1() const noexcept { return n1_; }
  std::size_t n0() const noexcept { return w_.size() - n1_; }

  // Copy with unit i flipped; used to audit that features ignore W_i.
  TreatmentVector flipped(std::size_t i) const {
    auto w = w_;
    w[i] ^= 1;
    return {std::move(w), pi_};
  }

  friend bool operator==(const TreatmentVector& a, const TreatmentVector& b) {
    return a.w_ == b.w_;
  }

 private:
  std::vector<std::uint8_t> w_;
  double pi_ = 0.5;
  std::size_t n1_ = 0;
};

// W_i ~ Bernoulli(pi) independently. Unit i's bit depends only on
// (seed, replicate, i), so the vector is reproducible under any scheduling.
inline TreatmentVector bernoulli_assign(std::size_t n, double pi, std::uint64_t seed,
                                        std::uint64_t replicate = 0) {
  if (!(pi > 0.0 && pi < 1.0)) throw InvalidParameter("treatment probability must lie in (0, 1)");
  const std::uint64_t key = derive_key(seed, {0xde5167, replicate});
  std::vector<std::uint8_t> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = to_unit_interval(mix64(key ^ mix64(i))) < pi ? 1 : 0;
  return {std::move(w), pi};
}

inline TreatmentVector global_vector(std::size_t n, int arm) {
  if (arm != 0 && arm != 1) throw InvalidParameter("global_vector: arm must be 0 or 1");
  return {std::vector<std::uint8_t>(n, static_cast<std::uint8_t>(arm)), static_cast<double>(arm)};
}

}  // namespace netgate

#include <gtest/gtest.h>

#include "netgate/design.hpp"

using namespace netgate;

TEST(Bernoulli, Deterministic) {
  EXPECT_EQ(bernoulli_assign(5, 0.5, 1), bernoulli_assign(5, 0.5, 1));
  EXPECT_EQ(bernoulli_assign(500, 0.3, 9, 4), bernoulli_assign(500, 0.3, 9, 4));
}

TEST(Bernoulli, ReplicatesDiffer) {
  EXPECT_FALSE(bernoulli_assign(500, 0.5, 9, 0) == bernoulli_assign(500, 0.5, 9, 1));
}

TEST(Bernoulli, Concentration) {
  for (std::uint64_t s : {1u, 2u, 3u}) {
    const auto w = bernoulli_assign(100000, 0.5, s);
    const double m = static_cast<double>(w.n1()) / 1e5;
    EXPECT_NEAR(m, 0.5, 0.01);
  }
  const auto w = bernoulli_assign(100000, 0.2, 4);
  EXPECT_NEAR(static_cast<double>(w.n1()) / 1e5, 0.2, 0.01);
}

TEST(Bernoulli, NearOneIsAllTreated) {
  const auto w = bernoulli_assign(3, 1.0 - 1e-12, 5);
  EXPECT_EQ(w.n1(), 3u);
}

TEST(Bernoulli, CountsAddUp) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto w = bernoulli_assign(37, 0.4, s);
    std::size_t n1 = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      ASSERT_LE(w[i], 1);
      n1 += w[i];
    }
    EXPECT_EQ(w.n1(), n1);
    EXPECT_EQ(w.n0() + w.n1(), 37u);
  }
}

TEST(Bernoulli, RejectsBadPi) {
  EXPECT_THROW(bernoulli_assign(3, 0.0, 1), InvalidParameter);
  EXPECT_THROW(bernoulli_assign(3, 1.0, 1), InvalidParameter);
  EXPECT_THROW(bernoulli_assign(3, -0.2, 1), InvalidParameter);
}

TEST(GlobalVector, Values) {
  EXPECT_EQ(global_vector(4, 1), TreatmentVector({1, 1, 1, 1}, 1.0));
  EXPECT_EQ(global_vector(4, 0), TreatmentVector({0, 0, 0, 0}, 0.0));
  EXPECT_EQ(global_vector(0, 1).size(), 0u);
}

TEST(TreatmentVector, FlipAndValidate) {
  const TreatmentVector w({1, 0, 1}, 0.5);
  const auto f = w.flipped(1);
  EXPECT_EQ(f[1], 1);
  EXPECT_EQ(f.n1(), 3u);
  EXPECT_THROW(TreatmentVector({0, 2}, 0.5), InvalidParameter);
}

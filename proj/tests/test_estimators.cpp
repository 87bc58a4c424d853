#include <gtest/gtest.h>

#include <sstream>

#include "netgate/estimators.hpp"
#include "netgate/simulate.hpp"

using namespace netgate;

namespace {

Graph parse(const std::string& text) {
  std::istringstream in(text);
  return load_edge_list(in);
}

// Star with centre 0 and leaves 1..d.
Graph star(std::size_t d) {
  std::vector<std::pair<Node, Node>> e;
  for (Node j = 1; j <= d; ++j) e.emplace_back(0, j);
  return Graph::from_edges(d + 1, e);
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double sample_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_se(const std::vector<double>& v) {
  const double m = sample_mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (static_cast<double>(v.size()) - 1.0) / static_cast<double>(v.size()));
}

MatrixXd noise_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Stream rng(seed, {7});
  MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = standard_normal(rng);
  return X;
}

}  // namespace

// ---------------------------------------------------------------------------

TEST(DifferenceInMeans, HandCases) {
  EXPECT_DOUBLE_EQ(difference_in_means(TreatmentVector({1, 0}, 0.5), vec({1, 3})).tau_hat, -2.0);
  EXPECT_DOUBLE_EQ(difference_in_means(TreatmentVector({1, 0, 1, 0}, 0.5), vec({4, 4, 4, 4})).tau_hat, 0.0);
  EXPECT_THROW(difference_in_means(TreatmentVector({1, 1}, 0.5), vec({1, 3})), DegenerateArm);
}

TEST(DifferenceInMeans, TargetsDirectEffectUnderExogenousSpillover) {
  // Under the exogenous linear-in-means model DM targets gamma, not gamma + delta.
  // Exactly: given N1, treated units see (N1 - 1)/(n - 1) treated neighbours on
  // average and controls N1/(n - 1), so E[DM] = gamma - delta/(n - 1).
  const Graph g = watts_strogatz(200, 6, 0.1, 3);
  const ExogenousLIM m{0.0, 1.0, 2.0, 1.0};
  std::vector<double> est;
  for (std::size_t r = 0; r < 10000; ++r) {
    const auto w = bernoulli_assign(200, 0.5, 17, r);
    est.push_back(difference_in_means(w, gen_response(m, g, w, derive_key(17, {r}))).tau_hat);
  }
  EXPECT_NEAR(sample_mean(est), 1.0 - 2.0 / 199.0, 3.0 * sample_se(est));
  EXPECT_GT(std::abs(sample_mean(est) - 3.0), 1.9);  // nowhere near gamma + delta
}

// ---------------------------------------------------------------------------

TEST(Exposure, HandPropensities) {
  const auto p4 = exposure_propensities(star(4), 0.75, 0.5);
  EXPECT_NEAR(p4.p1[0], 0.03125, 1e-15);
  EXPECT_NEAR(p4.p0[0], 0.15625, 1e-15);
  const auto p2 = exposure_propensities(star(2), 1.0, 0.5);
  EXPECT_NEAR(p2.p1[0], 0.125, 1e-15);
  // Leaves have degree 1: exposure needs the centre in the same arm.
  EXPECT_NEAR(p4.p1[1], 0.25, 1e-15);
  EXPECT_NEAR(p4.p0[1], 0.25, 1e-15);
}

TEST(Exposure, DegreeZeroConvention) {
  const Graph g = parse("# nodes 3\n0 1\n");
  for (double q : {0.75, 1.0}) {
    const auto p = exposure_propensities(g, q, 0.3);
    EXPECT_EQ(p.p1[2], 0.0);
    EXPECT_DOUBLE_EQ(p.p0[2], 0.7);
    const auto e = exposure_indicators(g, q, TreatmentVector({1, 1, 0}, 0.3));
    EXPECT_EQ(e.e1[2], 0);
    EXPECT_EQ(e.e0[2], 1);
    const auto e2 = exposure_indicators(g, q, TreatmentVector({1, 1, 1}, 0.3));
    EXPECT_EQ(e2.e1[2], 0);
    EXPECT_EQ(e2.e0[2], 0);
  }
}

TEST(Exposure, HandIndicators) {
  const Graph g = star(4);
  // centre treated, all leaves treated
  auto e = exposure_indicators(g, 0.75, TreatmentVector({1, 1, 1, 1, 1}, 0.5));
  EXPECT_EQ(e.e1[0], 1);
  EXPECT_EQ(e.e0[0], 0);
  // centre treated, half the leaves treated
  e = exposure_indicators(g, 0.75, TreatmentVector({1, 1, 1, 0, 0}, 0.5));
  EXPECT_EQ(e.e1[0], 0);
  // centre control, one of four leaves treated: 0.25 <= 1 - q
  e = exposure_indicators(g, 0.75, TreatmentVector({0, 1, 0, 0, 0}, 0.5));
  EXPECT_EQ(e.e0[0], 1);
  e = exposure_indicators(g, 0.75, TreatmentVector({0, 1, 1, 0, 0}, 0.5));
  EXPECT_EQ(e.e0[0], 0);
}

TEST(Exposure, RejectsBadQ) {
  EXPECT_THROW(exposure_propensities(star(3), 0.5, 0.5), InvalidParameter);
  EXPECT_THROW(exposure_propensities(star(3), 1.2, 0.5), InvalidParameter);
}

// The propensities are the design probabilities of the indicators: check by
// enumerating all 2^n assignments of a small graph.
TEST(Exposure, PropensitiesMatchIndicatorEnumeration) {
  const Graph g = parse("0 1\n0 2\n0 3\n1 2\n3 4\n4 5\n5 6\n2 6\n0 6\n");
  const std::size_t n = g.size();
  for (double q : {0.6, 0.75, 1.0})
    for (double pi : {0.3, 0.5}) {
      std::vector<double> p1(n, 0.0), p0(n, 0.0);
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        std::vector<std::uint8_t> w(n);
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i) k += w[i] = (mask >> i) & 1u;
        const double prob = std::pow(pi, k) * std::pow(1 - pi, n - k);
        const auto e = exposure_indicators(g, q, TreatmentVector(w, pi));
        for (std::size_t i = 0; i < n; ++i) {
          p1[i] += prob * e.e1[i];
          p0[i] += prob * e.e0[i];
          EXPECT_EQ(e.e1[i] * e.e0[i], 0);
        }
      }
      const auto prof = exposure_propensities(g, q, pi);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_NEAR(prof.p1[i], p1[i], 1e-12);
        EXPECT_NEAR(prof.p0[i], p0[i], 1e-12);
        EXPECT_LE(prof.p1[i], pi + 1e-15);
        EXPECT_LE(prof.p0[i], 1 - pi + 1e-15);
        EXPECT_LE(prof.p1[i] + prof.p0[i], 1.0 + 1e-15);
      }
    }
}

TEST(Exposure, TwoStepPropensitiesMatchEnumeration) {
  const Graph g = parse("0 1\n1 2\n2 3\n3 4\n1 5\n");
  const std::size_t n = g.size();
  std::vector<double> p1(n, 0.0);
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<std::uint8_t> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = (mask >> i) & 1u;
    const auto e = exposure_indicators(g, 0.75, TreatmentVector(w, 0.5), 2);
    for (std::size_t i = 0; i < n; ++i) p1[i] += e.e1[i] / 64.0;
  }
  const auto prof = exposure_propensities(g, 0.75, 0.5, 2);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(prof.p1[i], p1[i], 1e-12);
}

// ---------------------------------------------------------------------------

TEST(HorvitzThompson, HandCases) {
  ExposureProfile prof;
  prof.e1.assign(10, 0);
  prof.e0.assign(10, 0);
  prof.p1.assign(10, 0.1);
  prof.p0.assign(10, 0.1);
  VectorXd y = VectorXd::Zero(10);
  EXPECT_EQ(horvitz_thompson(y, prof).tau_hat, 0.0);
  prof.e1[3] = 1;
  y[3] = 2.0;
  const auto r = horvitz_thompson(y, prof);
  EXPECT_DOUBLE_EQ(r.tau_hat, 2.0);
  EXPECT_EQ(r.diagnostics.at("exposed1"), 1.0);
}

TEST(HorvitzThompson, UnbiasedOverFullEnumeration) {
  // On six nodes the design expectation of HT equals the exposure-contrast
  // estimand n^{-1} sum_i (E[Y_i | E1_i] - E[Y_i | E0_i]).
  const Graph g = parse("0 1\n1 2\n2 0\n2 3\n3 4\n4 5\n5 3\n");
  const std::size_t n = 6;
  const double pi = 0.4, q = 0.6;
  const auto probs = exposure_propensities(g, q, pi);
  auto outcome = [&](const std::vector<std::uint8_t>& w) {
    VectorXd y(6);
    for (Node i = 0; i < n; ++i) {
      double s = 0;
      for (Node j : g.neighbors(i)) s += w[j];
      y[i] = 1.0 + 2.0 * w[i] + 0.7 * s * s + 0.1 * i;
    }
    return y;
  };
  double eht = 0.0;
  std::vector<double> m1(n, 0.0), m0(n, 0.0);
  for (std::uint32_t mask = 0; mask < 64; ++mask) {
    std::vector<std::uint8_t> w(n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) k += w[i] = (mask >> i) & 1u;
    const double prob = std::pow(pi, k) * std::pow(1 - pi, n - k);
    const TreatmentVector tv(w, pi);
    const VectorXd y = outcome(w);
    const auto prof = exposure_profile(g, q, tv);
    eht += prob * horvitz_thompson(y, prof).tau_hat;
    for (std::size_t i = 0; i < n; ++i) {
      m1[i] += prob * prof.e1[i] * y[static_cast<Eigen::Index>(i)];
      m0[i] += prob * prof.e0[i] * y[static_cast<Eigen::Index>(i)];
    }
  }
  double estimand = 0.0;
  for (std::size_t i = 0; i < n; ++i) estimand += m1[i] / probs.p1[i] - m0[i] / probs.p0[i];
  EXPECT_NEAR(eht, estimand / n, 1e-12);
}

TEST(Hajek, SharedPropensityGivesSimpleMeans) {
  ExposureProfile prof;
  prof.e1 = {1, 1, 0, 0, 0};
  prof.e0 = {0, 0, 1, 1, 0};
  prof.p1.assign(5, 0.2);
  prof.p0.assign(5, 0.35);
  const auto r = hajek(vec({1, 3, 10, 20, 99}), prof);
  EXPECT_DOUBLE_EQ(r.tau_hat, 2.0 - 15.0);
  EXPECT_EQ(r.diagnostics.at("exposed0"), 2.0);
  EXPECT_NEAR(hajek(VectorXd::Constant(5, 4.2), prof).tau_hat, 0.0, 1e-15);
  prof.e0.assign(5, 0);
  EXPECT_THROW(hajek(vec({1, 3, 10, 20, 99}), prof), DegenerateArm);
}

TEST(Exposure, ZeroPropensityExposureIsAPositivityError) {
  ExposureProfile prof;
  prof.e1 = {1};
  prof.e0 = {0};
  prof.p1 = {0.0};
  prof.p0 = {0.5};
  EXPECT_THROW(horvitz_thompson(vec({1}), prof), PositivityViolation);
}

// ---------------------------------------------------------------------------

TEST(Ols, InterceptOnlyIsDifferenceInMeans) {
  const auto w = bernoulli_assign(50, 0.5, 1);
  const VectorXd y = noise_matrix(50, 1, 2).col(0);
  const MatrixXd X(50, 0);
  const auto fit = ols_fit(X, w, y);
  CounterfactualMeans om{VectorXd::Ones(1), VectorXd::Ones(1)};
  EXPECT_DOUBLE_EQ(ols_adjusted_tau(fit, om).tau_hat, difference_in_means(w, y).tau_hat);
}

TEST(Ols, ExactLinearData) {
  const auto w = bernoulli_assign(40, 0.5, 3);
  const MatrixXd X = noise_matrix(40, 1, 4);
  VectorXd y(40);
  for (Eigen::Index i = 0; i < 40; ++i) y[i] = (w[i] ? 5.0 : 2.0) + (w[i] ? -1.0 : 3.0) * X(i, 0);
  const auto fit = ols_fit(X, w, y);
  EXPECT_NEAR(fit.beta0[0], 2.0, 1e-10);
  EXPECT_NEAR(fit.beta0[1], 3.0, 1e-10);
  EXPECT_NEAR(fit.beta1[0], 5.0, 1e-10);
  EXPECT_NEAR(fit.beta1[1], -1.0, 1e-10);
}

TEST(Ols, RankDeficientArmIsFlagged) {
  const auto w = bernoulli_assign(40, 0.5, 5);
  MatrixXd X(40, 2);
  X.col(0) = noise_matrix(40, 1, 6).col(0);
  X.col(1) = 2.0 * X.col(0);
  const auto fit = ols_fit(X, w, VectorXd::Zero(40));
  EXPECT_FALSE(fit.rank_ok);
  CounterfactualMeans om{VectorXd::Ones(3), VectorXd::Ones(3)};
  EXPECT_THROW(ols_adjusted_tau(fit, om), SingularDesign);
}

TEST(Ols, UnbiasedCoefficientsUnderSeparateSlopes) {
  const Graph g = watts_strogatz(500, 10, 0.1, 8);
  const auto gs = single_graph(g);
  SeparateSlopesLinear m;
  m.beta0 = {0.1, 0.01};
  m.beta1 = {0.2, 0.05};
  FeatureBuilder fb(gs, m.recipes);
  const ResponseGenerator gen(m, gs);
  std::vector<std::vector<double>> b(6);
  for (std::size_t r = 0; r < 1000; ++r) {
    const auto w = bernoulli_assign(500, 0.5, 21, r);
    const auto fit = ols_fit(fb.build(w).values, w, gen.generate(w, derive_key(21, {r})));
    for (int j = 0; j < 3; ++j) {
      b[j].push_back(fit.beta0[j]);
      b[3 + j].push_back(fit.beta1[j]);
    }
  }
  const double truth[6] = {0.0, 0.1, 0.01, 1.0, 0.2, 0.05};
  for (int j = 0; j < 6; ++j) EXPECT_NEAR(sample_mean(b[j]), truth[j], 3.0 * sample_se(b[j])) << "coef " << j;
}

TEST(Ols, RecoversGlobalEffectUnderExogenousSpillover) {
  const Graph g = watts_strogatz(300, 8, 0.1, 9);
  const auto gs = single_graph(g);
  const ExogenousLIM m{0.5, 1.0, 2.0, 1.0};
  FeatureBuilder fb(gs, parse_recipes("frac1"));
  const auto om = fb.counterfactual_means();
  std::vector<double> est;
  for (std::size_t r = 0; r < 1000; ++r) {
    const auto w = bernoulli_assign(300, 0.5, 22, r);
    const VectorXd y = gen_response(m, g, w, derive_key(22, {r}));
    est.push_back(ols_adjusted_tau(ols_fit(fb.build(w).values, w, y), om).tau_hat);
  }
  EXPECT_NEAR(sample_mean(est), 3.0, 3.0 * sample_se(est));
}

TEST(Ols, NullSlopesTrackDifferenceInMeans) {
  const Graph g = watts_strogatz(2000, 10, 0.1, 10);
  const auto gs = single_graph(g);
  const SeparateSlopesLinear m;  // zero feature coefficients
  FeatureBuilder fb(gs, m.recipes);
  const auto w = bernoulli_assign(2000, 0.5, 23);
  const VectorXd y = gen_response(m, g, w, 24);
  const double adj = ols_adjusted_tau(ols_fit(fb.build(w).values, w, y), fb.counterfactual_means()).tau_hat;
  const double dm = difference_in_means(w, y).tau_hat;
  // Both estimate the same effect; the gap is sampling noise of the adjustment.
  EXPECT_NEAR(adj, dm, 0.5);
  EXPECT_NEAR(adj, 1.0, 0.5);
}

TEST(Ols, StaticCovariatesGiveInteractedRegressionAdjustment) {
  // With omega0 = omega1 = x-bar the estimator is the fully interacted
  // regression y ~ W + (x - xbar) + W(x - xbar); compare to its W coefficient.
  const Eigen::Index n = 80;
  const auto w = bernoulli_assign(n, 0.5, 25);
  const MatrixXd X = noise_matrix(n, 2, 26);
  const VectorXd y = (X.col(0) * 1.5 - X.col(1) + noise_matrix(n, 1, 27).col(0)).eval();
  const VectorXd xbar = X.colwise().mean().transpose();
  CounterfactualMeans om;
  om.omega0 = VectorXd(3);
  om.omega0 << 1.0, xbar;
  om.omega1 = om.omega0;
  const double tau = ols_adjusted_tau(ols_fit(X, w, y), om).tau_hat;
  MatrixXd D(n, 6);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd c = X.row(i) - xbar.transpose();
    D.row(i) << 1.0, static_cast<double>(w[static_cast<std::size_t>(i)]), c, w[static_cast<std::size_t>(i)] * c;
  }
  const VectorXd coef = D.colPivHouseholderQr().solve(y);
  EXPECT_NEAR(tau, coef[1], 1e-10);
}

TEST(Ols, ShiftedFormAgrees) {
  const Graph g = watts_strogatz(300, 8, 0.2, 11);
  FeatureBuilder fb(single_graph(g), parse_recipes("frac1,num1,frac2"));
  const auto om = fb.counterfactual_means();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto w = bernoulli_assign(300, 0.5, s);
    const MatrixXd X = fb.build(w).values;
    const VectorXd y = noise_matrix(300, 1, s + 100).col(0) + X.col(1) * 0.1;
    const auto fit = ols_fit(X, w, y);
    EXPECT_NEAR(ols_adjusted_tau(fit, om).tau_hat, ols_adjusted_tau_shifted(X, w, y, fit, om), 1e-10);
  }
}

// ---------------------------------------------------------------------------

TEST(Weights, InterceptOnlyIsUniform) {
  const auto w = bernoulli_assign(30, 0.5, 12);
  const auto ew = estimator_weights(MatrixXd(30, 0), w, {VectorXd::Ones(1), VectorXd::Ones(1)});
  for (Eigen::Index i = 0; i < ew.a1.size(); ++i) EXPECT_NEAR(ew.a1[i], 1.0 / w.n1(), 1e-14);
  for (Eigen::Index i = 0; i < ew.a0.size(); ++i) EXPECT_NEAR(ew.a0[i], 1.0 / w.n0(), 1e-14);
}

TEST(Weights, ReproduceEstimateAndAreNonzero) {
  const Graph g = watts_strogatz(400, 10, 0.1, 13);
  FeatureBuilder fb(single_graph(g), parse_recipes("frac1,num1"));
  const auto om = fb.counterfactual_means();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto w = bernoulli_assign(400, 0.5, s);
    const MatrixXd X = fb.build(w).values;
    const VectorXd y = noise_matrix(400, 1, s + 50).col(0) + 2.0 * X.col(0);
    const auto ew = estimator_weights(X, w, om);
    double t = 0;
    for (std::size_t k = 0; k < ew.rows1.size(); ++k) t += ew.a1[static_cast<Eigen::Index>(k)] * y[ew.rows1[k]];
    for (std::size_t k = 0; k < ew.rows0.size(); ++k) t -= ew.a0[static_cast<Eigen::Index>(k)] * y[ew.rows0[k]];
    EXPECT_NEAR(t, ols_adjusted_tau(ols_fit(X, w, y), om).tau_hat, 1e-10);
    EXPECT_GT(ew.a1.cwiseAbs().minCoeff(), 0.0);
    EXPECT_GT(ew.a0.cwiseAbs().minCoeff(), 0.0);
  }
}

// ---------------------------------------------------------------------------

TEST(CrossFit, SingleFoldOlsEqualsOlsAdjustment) {
  const Graph g = watts_strogatz(500, 10, 0.1, 14);
  FeatureBuilder fb(single_graph(g), parse_recipes("frac1,num1"));
  const auto om = fb.counterfactual_means();
  const MatrixXd X0 = fb.counterfactual(0), X1 = fb.counterfactual(1);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto w = bernoulli_assign(500, 0.5, s);
    const MatrixXd X = fb.build(w).values;
    const VectorXd y = noise_matrix(500, 1, s + 70).col(0) + 0.3 * X.col(1);
    const double cf = crossfit_adjusted_tau(OlsRegressor(), 1, X, X0, X1, w, y, s).tau_hat;
    EXPECT_NEAR(cf, ols_adjusted_tau(ols_fit(X, w, y), om).tau_hat, 1e-10);
  }
}

TEST(CrossFit, StaticFeaturesEqualSutvaCrossEstimator) {
  const Eigen::Index n = 200;
  const auto w = bernoulli_assign(n, 0.5, 15);
  const MatrixXd X = noise_matrix(n, 2, 16);
  const VectorXd y = (X.col(0) + noise_matrix(n, 1, 17).col(0)).eval();
  for (const auto& spec : {RegressorSpec{RegressorKind::Ols}, RegressorSpec{RegressorKind::Ridge, 0.1},
                           RegressorSpec{RegressorKind::Knn, 0.0, 7}})
    for (std::size_t K : {1u, 2u, 5u}) {
      const auto reg = make_regressor(spec);
      const double a = crossfit_adjusted_tau(*reg, K, X, X, X, w, y, 99).tau_hat;
      EXPECT_NEAR(a, crossfit_sutva_tau(*reg, K, X, w, y, 99), 1e-10) << reg->name() << " K=" << K;
    }
}

TEST(CrossFit, FoldsAreBalancedAndDeterministic) {
  const Eigen::Index n = 103;
  const auto w = bernoulli_assign(n, 0.5, 18);
  const MatrixXd X = noise_matrix(n, 1, 19);
  const VectorXd y = X.col(0);
  const auto a = crossfit_adjusted(OlsRegressor(), 4, X, X, X, w, y, 5);
  const auto b = crossfit_adjusted(OlsRegressor(), 4, X, X, X, w, y, 5);
  EXPECT_EQ(a.fold, b.fold);
  EXPECT_EQ(a.report.tau_hat, b.report.tau_hat);
  std::vector<std::size_t> sizes(4, 0);
  for (auto f : a.fold) ++sizes[f];
  for (auto s : sizes) EXPECT_TRUE(s == 25 || s == 26);
}

TEST(CrossFit, EmptyArmIsDegenerate) {
  const MatrixXd X = noise_matrix(10, 1, 20);
  EXPECT_THROW(crossfit_adjusted_tau(OlsRegressor(), 2, X, X, X, global_vector(10, 1), X.col(0), 1), DegenerateArm);
}

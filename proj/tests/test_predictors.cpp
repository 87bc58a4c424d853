#include <gtest/gtest.h>

#include "netgate/predictors.hpp"
#include "netgate/random.hpp"
#include "netgate/simulate.hpp"

using namespace netgate;

namespace {

MatrixXd random_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Stream rng(seed, {1});
  MatrixXd X(n, p);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < p; ++j) X(i, j) = standard_normal(rng);
  return X;
}

}  // namespace

TEST(Ols, ExactRecoveryOnLinearData) {
  const MatrixXd X = random_matrix(30, 3, 1);
  const VectorXd y = (2.0 + (X * Eigen::Vector3d(3, -1, 0.5)).array()).matrix();
  const auto fit = OlsRegressor().fit(X, y);
  const auto* lm = dynamic_cast<const LinearModel*>(fit.get());
  ASSERT_NE(lm, nullptr);
  EXPECT_NEAR(lm->intercept(), 2.0, 1e-10);
  EXPECT_NEAR(lm->slopes()[0], 3.0, 1e-10);
  const MatrixXd Xe = random_matrix(5, 3, 2);
  const VectorXd want = (2.0 + (Xe * Eigen::Vector3d(3, -1, 0.5)).array()).matrix();
  EXPECT_LT((fit_predict({RegressorKind::Ols}, X, y, Xe) - want).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ols, TooFewRows) {
  EXPECT_THROW(OlsRegressor().fit(random_matrix(3, 3, 1), VectorXd::Zero(3)), SingularDesign);
}

TEST(Ridge, ZeroPenaltyIsOls) {
  const MatrixXd X = random_matrix(40, 2, 3);
  const VectorXd y = random_matrix(40, 1, 4).col(0);
  const MatrixXd Xe = random_matrix(6, 2, 5);
  const VectorXd a = fit_predict({RegressorKind::Ridge, 0.0}, X, y, Xe);
  const VectorXd b = fit_predict({RegressorKind::Ols}, X, y, Xe);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Ridge, ClosedFormOracle) {
  // Centred ridge solution (Xc'Xc + lam I)^{-1} Xc'(y - ybar), lam = lambda tr(Xc'Xc)/p.
  const MatrixXd X = random_matrix(25, 3, 6);
  const VectorXd y = random_matrix(25, 1, 7).col(0);
  const double lambda = 0.3;
  const MatrixXd Xc = X.rowwise() - X.colwise().mean();
  const double lam = lambda * Xc.squaredNorm() / 3.0;
  const VectorXd b = (Xc.transpose() * Xc + lam * MatrixXd::Identity(3, 3)).ldlt().solve(Xc.transpose() * (y.array() - y.mean()).matrix());
  const auto fit = RidgeRegressor(lambda).fit(X, y);
  const auto* lm = dynamic_cast<const LinearModel*>(fit.get());
  ASSERT_NE(lm, nullptr);
  EXPECT_LT((lm->slopes() - b).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(lm->intercept(), y.mean() - X.colwise().mean().dot(b), 1e-10);
  EXPECT_NEAR(fit->diagnostics.at("lambda_effective"), lam, 1e-12);
}

TEST(Ridge, ShrinksTowardMean) {
  const MatrixXd X = random_matrix(50, 2, 8);
  const VectorXd y = (X.col(0) * 4.0).eval();
  const VectorXd p = fit_predict({RegressorKind::Ridge, 1e6}, X, y, X);
  EXPECT_LT((p.array() - y.mean()).abs().maxCoeff(), 1e-3);
}

TEST(Knn, FullNeighbourhoodIsMean) {
  const MatrixXd X = random_matrix(17, 2, 9);
  const VectorXd y = random_matrix(17, 1, 10).col(0);
  const VectorXd p = fit_predict({RegressorKind::Knn, 0.0, 17}, X, y, random_matrix(4, 2, 11));
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], y.mean(), 1e-12);
}

TEST(Knn, BruteForceOracle) {
  const MatrixXd X = random_matrix(60, 2, 12);
  const VectorXd y = random_matrix(60, 1, 13).col(0);
  const MatrixXd Xe = random_matrix(8, 2, 14);
  const std::size_t k = 5;
  const VectorXd p = KnnRegressor(k).fit(X, y)->predict(Xe);
  const Eigen::RowVectorXd mu = X.colwise().mean();
  const Eigen::RowVectorXd sd = ((X.rowwise() - mu).colwise().squaredNorm() / 60.0).cwiseSqrt();
  for (Eigen::Index r = 0; r < Xe.rows(); ++r) {
    std::vector<std::pair<double, Eigen::Index>> d;
    for (Eigen::Index j = 0; j < 60; ++j)
      d.emplace_back(((X.row(j) - Xe.row(r)).cwiseQuotient(sd)).squaredNorm(), j);
    std::sort(d.begin(), d.end());
    double s = 0;
    for (std::size_t t = 0; t < k; ++t) s += y[d[t].second];
    EXPECT_NEAR(p[r], s / k, 1e-12);
  }
}

TEST(Knn, OneNeighbourInterpolates) {
  const MatrixXd X = random_matrix(20, 3, 15);
  const VectorXd y = random_matrix(20, 1, 16).col(0);
  EXPECT_LT((KnnRegressor(1).fit(X, y)->predict(X) - y).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Logistic, AllZerosFallsBackToPenalty) {
  const MatrixXd X = random_matrix(50, 2, 17);
  const auto fit = LogisticRegressor().fit(X, VectorXd::Zero(50));
  EXPECT_EQ(fit->diagnostics.at("penalized"), 1.0);
  EXPECT_LT(fit->predict(X).maxCoeff(), 0.01);
}

TEST(Logistic, RecoversCoefficients) {
  const Eigen::Index n = 20000;
  const MatrixXd X = random_matrix(n, 2, 18);
  Stream rng(19);
  VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double eta = -0.5 + 1.0 * X(i, 0) - 2.0 * X(i, 1);
    y[i] = rng.uniform() < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  const auto fit = LogisticRegressor().fit(X, y);
  EXPECT_EQ(fit->diagnostics.at("penalized"), 0.0);
  const auto& b = dynamic_cast<const LogisticModel&>(*fit).coefficients();
  EXPECT_NEAR(b[0], -0.5, 0.1);
  EXPECT_NEAR(b[1], 1.0, 0.1);
  EXPECT_NEAR(b[2], -2.0, 0.1);
}

TEST(Logistic, RejectsNonBinary) {
  EXPECT_THROW(LogisticRegressor().fit(random_matrix(5, 1, 1), VectorXd::Constant(5, 0.5)), ConfigError);
}

TEST(Spec, ParseKinds) {
  EXPECT_EQ(parse_regressor_kind("knn"), RegressorKind::Knn);
  EXPECT_EQ(make_regressor({RegressorKind::Ridge})->name(), "ridge");
  EXPECT_THROW(parse_regressor_kind("gam"), ConfigError);
}

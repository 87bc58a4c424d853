#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "netgate/error.hpp"

namespace netgate {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class FittedModel {
 public:
  virtual ~FittedModel() = default;
  virtual VectorXd predict(const MatrixXd& X) const = 0;
  // Free-form numeric notes, e.g. whether a penalty fallback was taken.
  std::map<std::string, double> diagnostics;
};

class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual std::unique_ptr<FittedModel> fit(const MatrixXd& X, const VectorXd& y) const = 0;
  virtual std::string name() const = 0;
};

namespace detail {

inline MatrixXd with_intercept(const MatrixXd& X) {
  MatrixXd D(X.rows(), X.cols() + 1);
  D.col(0).setOnes();
  D.rightCols(X.cols()) = X;
  return D;
}

inline void check_training(const MatrixXd& X, const VectorXd& y) {
  if (X.rows() != y.size()) throw InvalidParameter("training matrix and response differ in length");
  if (X.rows() < 1) throw DegenerateArm("regressor needs at least one training row", 0, 0);
}

}  // namespace detail

class LinearModel final : public FittedModel {
 public:
  LinearModel(double intercept, VectorXd slopes) : intercept_(intercept), slopes_(std::move(slopes)) {}
  VectorXd predict(const MatrixXd& X) const override {
    if (X.cols() != slopes_.size()) throw InvalidParameter("prediction matrix has the wrong width");
    VectorXd out = X * slopes_;
    out.array() += intercept_;
    return out;
  }
  double intercept() const noexcept { return intercept_; }
  const VectorXd& slopes() const noexcept { return slopes_; }

 private:
  double intercept_;
  VectorXd slopes_;
};

// Least squares with an intercept via Householder QR.
class OlsRegressor final : public Regressor {
 public:
  std::unique_ptr<FittedModel> fit(const MatrixXd& X, const VectorXd& y) const override {
    detail::check_training(X, y);
    if (X.rows() < X.cols() + 1)
      throw SingularDesign("OLS needs at least p+1 training rows, got " + std::to_string(X.rows()));
    Eigen::HouseholderQR<MatrixXd> qr(detail::with_intercept(X));
    VectorXd b = qr.solve(y);
    if (!b.allFinite()) throw SingularDesign("OLS design is singular");
    return std::make_unique<LinearModel>(b[0], b.tail(X.cols()));
  }
  std::string name() const override { return "ols"; }
};

// Ridge on centred columns; the intercept is not penalised. The penalty is
// lambda * tr(Xc'Xc) / p so the default is scale-free.
class RidgeRegressor final : public Regressor {
 public:
  explicit RidgeRegressor(double lambda = 1e-3) : lambda_(lambda) {
    if (!(lambda >= 0.0)) throw InvalidParameter("ridge lambda must be nonnegative");
  }
  std::unique_ptr<FittedModel> fit(const MatrixXd& X, const VectorXd& y) const override {
    detail::check_training(X, y);
    const Eigen::Index n = X.rows(), p = X.cols();
    const double ybar = y.mean();
    if (p == 0) return std::make_unique<LinearModel>(ybar, VectorXd());
    const Eigen::RowVectorXd xbar = X.colwise().mean();
    MatrixXd Xc = X.rowwise() - xbar;
    const double scale = Xc.squaredNorm() / static_cast<double>(p);
    const double lam = lambda_ * (scale > 0.0 ? scale : 1.0);
    MatrixXd A(n + p, p);
    A.topRows(n) = Xc;
    A.bottomRows(p) = std::sqrt(lam) * MatrixXd::Identity(p, p);
    VectorXd rhs = VectorXd::Zero(n + p);
    rhs.head(n) = y.array() - ybar;
    VectorXd b = Eigen::HouseholderQR<MatrixXd>(A).solve(rhs);
    if (!b.allFinite()) throw SingularDesign("ridge solve failed");
    const double a = ybar - xbar.dot(b);
    auto m = std::make_unique<LinearModel>(a, std::move(b));
    m->diagnostics["lambda_effective"] = lam;
    return m;
  }
  std::string name() const override { return "ridge"; }
  double lambda() const noexcept { return lambda_; }

 private:
  double lambda_;
};

class KnnModel final : public FittedModel {
 public:
  KnnModel(MatrixXd Z, VectorXd y, Eigen::RowVectorXd mean, Eigen::RowVectorXd sd, std::size_t k)
      : Z_(std::move(Z)), y_(std::move(y)), mean_(std::move(mean)), sd_(std::move(sd)), k_(k) {}

  VectorXd predict(const MatrixXd& X) const override {
    if (X.cols() != Z_.cols()) throw InvalidParameter("prediction matrix has the wrong width");
    const Eigen::Index m = Z_.rows();
    const auto k = static_cast<Eigen::Index>(std::min<std::size_t>(k_, static_cast<std::size_t>(m)));
    VectorXd out(X.rows());
    std::vector<std::pair<double, Eigen::Index>> d(static_cast<std::size_t>(m));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
      const Eigen::RowVectorXd z = (X.row(r) - mean_).cwiseQuotient(sd_);
      for (Eigen::Index j = 0; j < m; ++j) d[static_cast<std::size_t>(j)] = {(Z_.row(j) - z).squaredNorm(), j};
      // Pairs compare by distance then index, so ties go to the lowest index.
      std::nth_element(d.begin(), d.begin() + (k - 1), d.end());
      double s = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) s += y_[d[static_cast<std::size_t>(j)].second];
      out[r] = s / static_cast<double>(k);
    }
    return out;
  }

  const Eigen::RowVectorXd& mean() const noexcept { return mean_; }
  const Eigen::RowVectorXd& sd() const noexcept { return sd_; }

 private:
  MatrixXd Z_;
  VectorXd y_;
  Eigen::RowVectorXd mean_, sd_;
  std::size_t k_;
};

// Mean of the k nearest training rows in Euclidean distance after
// standardising with training-set means and standard deviations.
class KnnRegressor final : public Regressor {
 public:
  explicit KnnRegressor(std::size_t k = 20) : k_(k) {
    if (k < 1) throw InvalidParameter("k-NN needs k >= 1");
  }
  std::unique_ptr<FittedModel> fit(const MatrixXd& X, const VectorXd& y) const override {
    detail::check_training(X, y);
    Eigen::RowVectorXd mean = X.colwise().mean();
    MatrixXd C = X.rowwise() - mean;
    Eigen::RowVectorXd sd = (C.colwise().squaredNorm() / static_cast<double>(X.rows())).cwiseSqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j)
      if (!(sd[j] > 0.0)) sd[j] = 1.0;
    MatrixXd Z = C.array().rowwise() / sd.array();
    return std::make_unique<KnnModel>(std::move(Z), y, std::move(mean), std::move(sd), k_);
  }
  std::string name() const override { return "knn"; }
  std::size_t k() const noexcept { return k_; }

 private:
  std::size_t k_;
};

class LogisticModel final : public FittedModel {
 public:
  explicit LogisticModel(VectorXd beta) : beta_(std::move(beta)) {}
  VectorXd predict(const MatrixXd& X) const override {
    if (X.cols() + 1 != beta_.size()) throw InvalidParameter("prediction matrix has the wrong width");
    VectorXd eta = (X * beta_.tail(X.cols())).array() + beta_[0];
    return eta.unaryExpr([](double t) { return 1.0 / (1.0 + std::exp(-t)); });
  }
  const VectorXd& coefficients() const noexcept { return beta_; }

 private:
  VectorXd beta_;
};

// Binary response. Damped Newton on the log-likelihood; when the data are
// separated (no finite MLE) the fit is redone with an L2 penalty.
class LogisticRegressor final : public Regressor {
 public:
  explicit LogisticRegressor(double fallback_lambda = 1e-4, double tol = 1e-8, int max_iter = 100)
      : fallback_lambda_(fallback_lambda), tol_(tol), max_iter_(max_iter) {}

  std::unique_ptr<FittedModel> fit(const MatrixXd& X, const VectorXd& y) const override {
    detail::check_training(X, y);
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] != 0.0 && y[i] != 1.0) throw ConfigError("logistic regressor needs a 0/1 response");
    const MatrixXd D = detail::with_intercept(X);
    VectorXd beta;
    // A constant response is separated by any hyperplane; skip straight to
    // the penalised fit rather than chasing an infinite intercept.
    const bool constant = (y.array() == y[0]).all();
    if (!constant && newton(D, y, 0.0, beta)) {
      auto m = std::make_unique<LogisticModel>(std::move(beta));
      m->diagnostics["penalized"] = 0.0;
      return m;
    }
    if (!newton(D, y, fallback_lambda_, beta))
      throw NumericalError("penalised logistic fit did not converge");
    auto m = std::make_unique<LogisticModel>(std::move(beta));
    m->diagnostics["penalized"] = 1.0;
    return m;
  }
  std::string name() const override { return "logistic"; }

 private:
  static double objective(const MatrixXd& D, const VectorXd& y, const VectorXd& b, double lam) {
    const VectorXd eta = D * b;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double t = eta[i];
      // log(1 + e^t) evaluated without overflow
      const double softplus = t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
      ll += y[i] * t - softplus;
    }
    return -ll + 0.5 * lam * b.squaredNorm();
  }

  // Returns false when the unpenalised problem looks separated.
  bool newton(const MatrixXd& D, const VectorXd& y, double lam, VectorXd& b) const {
    const Eigen::Index p = D.cols();
    b = VectorXd::Zero(p);
    double f = objective(D, y, b, lam);
    for (int it = 0; it < max_iter_; ++it) {
      const VectorXd mu = (D * b).unaryExpr([](double t) { return 1.0 / (1.0 + std::exp(-t)); });
      const VectorXd g = D.transpose() * (mu - y) + lam * b;
      if (g.norm() < tol_) return true;
      const VectorXd wts = mu.array() * (1.0 - mu.array());
      MatrixXd H = D.transpose() * wts.asDiagonal() * D;
      H.diagonal().array() += lam;
      Eigen::LDLT<MatrixXd> ldlt(H);
      if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
        if (lam == 0.0) return false;
        H.diagonal().array() += 1e-12;
        ldlt.compute(H);
      }
      const VectorXd step = ldlt.solve(g);
      double t = 1.0;
      VectorXd next = b - step;
      double fn = objective(D, y, next, lam);
      while (!(fn <= f) && t > 1e-10) {
        t *= 0.5;
        next = b - t * step;
        fn = objective(D, y, next, lam);
      }
      if (!(fn <= f)) return lam > 0.0 ? g.norm() < 1e3 * tol_ : false;
      b = next;
      f = fn;
      // coefficients running off to infinity mean there is no finite MLE
      if (lam == 0.0 && b.cwiseAbs().maxCoeff() > 30.0) return false;
    }
    return false;
  }

  double fallback_lambda_, tol_;
  int max_iter_;
};

enum class RegressorKind { Ols, Ridge, Knn, Logistic };

struct RegressorSpec {
  RegressorKind kind = RegressorKind::Ols;
  double lambda = 1e-3;  // ridge
  std::size_t k = 20;    // k-NN
};

inline RegressorKind parse_regressor_kind(const std::string& s) {
  if (s == "ols") return RegressorKind::Ols;
  if (s == "ridge") return RegressorKind::Ridge;
  if (s == "knn") return RegressorKind::Knn;
  if (s == "logistic") return RegressorKind::Logistic;
  throw ConfigError("unknown regressor '" + s + "' (expected ols, ridge, knn or logistic)");
}

inline std::shared_ptr<const Regressor> make_regressor(const RegressorSpec& spec) {
  switch (spec.kind) {
    case RegressorKind::Ols: return std::make_shared<OlsRegressor>();
    case RegressorKind::Ridge: return std::make_shared<RidgeRegressor>(spec.lambda);
    case RegressorKind::Knn: return std::make_shared<KnnRegressor>(spec.k);
    case RegressorKind::Logistic: return std::make_shared<LogisticRegressor>();
  }
  throw ConfigError("unknown regressor kind");
}

inline VectorXd fit_predict(const RegressorSpec& spec, const MatrixXd& X_train, const VectorXd& y_train,
                            const MatrixXd& X_eval) {
  return make_regressor(spec)->fit(X_train, y_train)->predict(X_eval);
}

}  // namespace netgate

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "netgate/design.hpp"
#include "netgate/error.hpp"
#include "netgate/features.hpp"
#include "netgate/graph.hpp"
#include "netgate/predictors.hpp"
#include "netgate/random.hpp"

namespace netgate {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.9;
};

struct EstimateReport {
  std::string method;
  double tau_hat = 0.0;
  std::optional<double> se;
  std::optional<Interval> ci;
  std::map<std::string, double> diagnostics;
  std::vector<double> bootstrap_draws;
};

namespace detail {

inline void check_response(const TreatmentVector& w, const VectorXd& y) {
  if (static_cast<std::size_t>(y.size()) != w.size())
    throw InvalidParameter("response and treatment vectors differ in length");
}

struct ArmMeans {
  double mean0 = 0.0, mean1 = 0.0;
  std::size_t n0 = 0, n1 = 0;
};

// Shared by difference-in-means and the intercept-only regression so the two
// agree bit for bit.
inline ArmMeans arm_means(const TreatmentVector& w, const VectorXd& y) {
  ArmMeans m;
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i]) {
      s1 += y[static_cast<Eigen::Index>(i)];
      ++m.n1;
    } else {
      s0 += y[static_cast<Eigen::Index>(i)];
      ++m.n0;
    }
  }
  if (m.n0 == 0 || m.n1 == 0) throw DegenerateArm("an arm has no units", m.n0, m.n1);
  m.mean0 = s0 / static_cast<double>(m.n0);
  m.mean1 = s1 / static_cast<double>(m.n1);
  return m;
}

inline std::vector<Eigen::Index> arm_rows(const TreatmentVector& w, int arm) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < w.size(); ++i)
    if (w[i] == arm) rows.push_back(static_cast<Eigen::Index>(i));
  return rows;
}

inline MatrixXd design_rows(const MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  MatrixXd D(static_cast<Eigen::Index>(rows.size()), X.cols() + 1);
  D.col(0).setOnes();
  for (std::size_t r = 0; r < rows.size(); ++r) D.row(static_cast<Eigen::Index>(r)).tail(X.cols()) = X.row(rows[r]);
  return D;
}

inline VectorXd gather(const VectorXd& y, const std::vector<Eigen::Index>& rows) {
  VectorXd out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) out[static_cast<Eigen::Index>(r)] = y[rows[r]];
  return out;
}

}  // namespace detail

inline EstimateReport difference_in_means(const TreatmentVector& w, const VectorXd& y) {
  detail::check_response(w, y);
  const auto m = detail::arm_means(w, y);
  EstimateReport r;
  r.method = "dm";
  r.tau_hat = m.mean1 - m.mean0;
  r.diagnostics["n0"] = static_cast<double>(m.n0);
  r.diagnostics["n1"] = static_cast<double>(m.n1);
  return r;
}

// ---------------------------------------------------------------------------
// Exposure model

struct ExposureProfile {
  std::vector<std::uint8_t> e1, e0;
  std::vector<double> p1, p0;
  double q = 0.75;
  double pi = 0.5;
};

// Count thresholds for a neighbourhood of size d. Treatment exposure needs more
// than floor(dq) treated neighbours (all of them when q = 1); control exposure
// needs at most floor(d(1-q)). These are the indicator rules whose exact
// probabilities are the binomial tails used below.
struct ExposureThresholds {
  std::size_t treat;    // exposed to treatment iff count >= treat (d >= 1)
  std::size_t control;  // exposed to control iff count <= control
};

inline ExposureThresholds exposure_thresholds(std::size_t d, double q) {
  const double dd = static_cast<double>(d);
  const auto fq = static_cast<std::size_t>(std::floor(dd * q + 1e-9));
  const auto fc = static_cast<std::size_t>(std::floor(dd * (1.0 - q) + 1e-9));
  return {std::min(fq + 1, d), fc};
}

namespace detail {

inline void check_q(double q) {
  if (!(q > 0.5 && q <= 1.0)) throw InvalidParameter("exposure threshold q must lie in (0.5, 1]");
}

inline double log_binom_pmf(std::size_t d, std::size_t k, double lp, double lq) {
  const double lc = std::lgamma(static_cast<double>(d) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                    std::lgamma(static_cast<double>(d - k) + 1.0);
  // 0 * log(0) = 0 at the edge of the support
  const double a = k == 0 ? 0.0 : static_cast<double>(k) * lp;
  const double b = k == d ? 0.0 : static_cast<double>(d - k) * lq;
  return lc + a + b;
}

// P(lo <= Bin(d, pi) <= hi) by log-sum-exp over the atoms in range.
inline double binom_range(std::size_t d, double pi, std::size_t lo, std::size_t hi) {
  if (lo > hi || lo > d) return 0.0;
  hi = std::min(hi, d);
  const double lp = std::log(pi), lq = std::log1p(-pi);
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  terms.reserve(hi - lo + 1);
  for (std::size_t k = lo; k <= hi; ++k) {
    terms.push_back(log_binom_pmf(d, k, lp, lq));
    mx = std::max(mx, terms.back());
  }
  double s = 0.0;
  for (double t : terms) s += std::exp(t - mx);
  return std::exp(mx + std::log(s));
}

inline std::vector<std::size_t> hood_sizes(const Graph& g, unsigned step) {
  std::vector<std::size_t> d(g.size());
  for (Node i = 0; i < g.size(); ++i) d[i] = step == 1 ? g.degree(i) : neighborhood(g, i, step).size();
  return d;
}

}  // namespace detail

// Exact probabilities of q-fractional exposure to global treatment and
// control under Bernoulli(pi). step selects the neighbourhood N^(step).
inline ExposureProfile exposure_propensities(const Graph& g, double q, double pi, unsigned step = 1) {
  detail::check_q(q);
  if (!(pi > 0.0 && pi < 1.0)) throw InvalidParameter("treatment probability must lie in (0, 1)");
  ExposureProfile prof;
  prof.q = q;
  prof.pi = pi;
  const auto sizes = detail::hood_sizes(g, step);
  prof.p1.resize(g.size());
  prof.p0.resize(g.size());
  std::map<std::size_t, std::pair<double, double>> cache;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t d = sizes[i];
    auto it = cache.find(d);
    if (it == cache.end()) {
      double p1 = 0.0, p0 = 1.0 - pi;
      if (d > 0) {
        const auto t = exposure_thresholds(d, q);
        p1 = pi * detail::binom_range(d, pi, t.treat, d);
        p0 = (1.0 - pi) * detail::binom_range(d, pi, 0, t.control);
      }
      it = cache.emplace(d, std::make_pair(p1, p0)).first;
    }
    prof.p1[i] = it->second.first;
    prof.p0[i] = it->second.second;
  }
  return prof;
}

inline ExposureProfile exposure_indicators(const Graph& g, double q, const TreatmentVector& w, unsigned step = 1) {
  detail::check_q(q);
  if (w.size() != g.size()) throw InvalidParameter("treatment vector length does not match graph size");
  ExposureProfile prof;
  prof.q = q;
  prof.pi = w.pi();
  prof.e1.assign(g.size(), 0);
  prof.e0.assign(g.size(), 0);
  for (Node i = 0; i < g.size(); ++i) {
    std::size_t d = 0, count = 0;
    auto tally = [&](Node j) {
      ++d;
      count += w[j];
    };
    if (step == 1) {
      for (Node j : g.neighbors(i)) tally(j);
    } else {
      for (Node j : neighborhood(g, i, step)) tally(j);
    }
    const auto t = exposure_thresholds(d, q);
    prof.e1[i] = static_cast<std::uint8_t>(w[i] == 1 && d > 0 && count >= t.treat);
    prof.e0[i] = static_cast<std::uint8_t>(w[i] == 0 && count <= t.control);
  }
  return prof;
}

inline ExposureProfile exposure_profile(const Graph& g, double q, const TreatmentVector& w, unsigned step = 1) {
  auto prof = exposure_indicators(g, q, w, step);
  auto probs = exposure_propensities(g, q, w.pi(), step);
  prof.p1 = std::move(probs.p1);
  prof.p0 = std::move(probs.p0);
  return prof;
}

namespace detail {

inline void check_profile(const ExposureProfile& prof, const VectorXd& y) {
  const auto n = static_cast<std::size_t>(y.size());
  if (prof.e1.size() != n || prof.e0.size() != n || prof.p1.size() != n || prof.p0.size() != n)
    throw InvalidParameter("exposure profile and response differ in length");
}

}  // namespace detail

inline EstimateReport horvitz_thompson(const VectorXd& y, const ExposureProfile& prof) {
  detail::check_profile(prof, y);
  const auto n = static_cast<std::size_t>(y.size());
  if (n == 0) throw DegenerateArm("empty sample", 0, 0);
  double s = 0.0;
  std::size_t c0 = 0, c1 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double yi = y[static_cast<Eigen::Index>(i)];
    if (prof.e1[i]) {
      if (!(prof.p1[i] > 0.0)) throw PositivityViolation("unit " + std::to_string(i) + " exposed with zero propensity");
      s += yi / prof.p1[i];
      ++c1;
    }
    if (prof.e0[i]) {
      if (!(prof.p0[i] > 0.0)) throw PositivityViolation("unit " + std::to_string(i) + " exposed with zero propensity");
      s -= yi / prof.p0[i];
      ++c0;
    }
  }
  EstimateReport r;
  r.method = "ht";
  r.tau_hat = s / static_cast<double>(n);
  r.diagnostics["exposed0"] = static_cast<double>(c0);
  r.diagnostics["exposed1"] = static_cast<double>(c1);
  return r;
}

inline EstimateReport hajek(const VectorXd& y, const ExposureProfile& prof) {
  detail::check_profile(prof, y);
  double s1 = 0.0, w1 = 0.0, s0 = 0.0, w0 = 0.0;
  std::size_t c0 = 0, c1 = 0;
  for (std::size_t i = 0; i < prof.e1.size(); ++i) {
    const double yi = y[static_cast<Eigen::Index>(i)];
    if (prof.e1[i]) {
      if (!(prof.p1[i] > 0.0)) throw PositivityViolation("unit " + std::to_string(i) + " exposed with zero propensity");
      s1 += yi / prof.p1[i];
      w1 += 1.0 / prof.p1[i];
      ++c1;
    }
    if (prof.e0[i]) {
      if (!(prof.p0[i] > 0.0)) throw PositivityViolation("unit " + std::to_string(i) + " exposed with zero propensity");
      s0 += yi / prof.p0[i];
      w0 += 1.0 / prof.p0[i];
      ++c0;
    }
  }
  if (c0 == 0 || c1 == 0)
    throw DegenerateArm("Hajek estimator needs exposed units in both arms (exposed0=" + std::to_string(c0) +
                            ", exposed1=" + std::to_string(c1) + ")",
                        c0, c1);
  EstimateReport r;
  r.method = "hajek";
  r.tau_hat = s1 / w1 - s0 / w0;
  r.diagnostics["exposed0"] = static_cast<double>(c0);
  r.diagnostics["exposed1"] = static_cast<double>(c1);
  return r;
}

// ---------------------------------------------------------------------------
// Separate-slopes OLS

inline constexpr double kMaxCondition = 1e8;

struct SeparateSlopesFit {
  VectorXd beta0, beta1;  // intercept first
  bool rank_ok = true;
  double cond0 = 1.0, cond1 = 1.0;
  std::size_t n0 = 0, n1 = 0;
};

namespace detail {

inline double r_condition(const MatrixXd& R) {
  if (R.cols() == 0) return 1.0;
  Eigen::JacobiSVD<MatrixXd> svd(R);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

struct ArmFit {
  VectorXd beta;
  double cond = 1.0;
};

inline ArmFit fit_arm(const MatrixXd& X, const VectorXd& y, const std::vector<Eigen::Index>& rows, int arm) {
  const Eigen::Index p = X.cols();
  if (static_cast<Eigen::Index>(rows.size()) < p + 1)
    throw SingularDesign("arm " + std::to_string(arm) + " has " + std::to_string(rows.size()) +
                         " units, fewer than the " + std::to_string(p + 1) + " coefficients");
  Eigen::HouseholderQR<MatrixXd> qr(design_rows(X, rows));
  ArmFit f;
  f.beta = qr.solve(gather(y, rows));
  const MatrixXd R = qr.matrixQR().topRows(p + 1).triangularView<Eigen::Upper>();
  f.cond = r_condition(R);
  return f;
}

}  // namespace detail

inline SeparateSlopesFit ols_fit(const MatrixXd& X, const TreatmentVector& w, const VectorXd& y) {
  detail::check_response(w, y);
  if (static_cast<std::size_t>(X.rows()) != w.size()) throw InvalidParameter("feature matrix has the wrong number of rows");
  SeparateSlopesFit fit;
  fit.n0 = w.n0();
  fit.n1 = w.n1();
  if (fit.n0 == 0 || fit.n1 == 0) throw DegenerateArm("an arm has no units", fit.n0, fit.n1);
  if (X.cols() == 0) {
    const auto m = detail::arm_means(w, y);
    fit.beta0 = VectorXd::Constant(1, m.mean0);
    fit.beta1 = VectorXd::Constant(1, m.mean1);
    return fit;
  }
  auto a0 = detail::fit_arm(X, y, detail::arm_rows(w, 0), 0);
  auto a1 = detail::fit_arm(X, y, detail::arm_rows(w, 1), 1);
  fit.beta0 = std::move(a0.beta);
  fit.beta1 = std::move(a1.beta);
  fit.cond0 = a0.cond;
  fit.cond1 = a1.cond;
  fit.rank_ok = fit.cond0 <= kMaxCondition && fit.cond1 <= kMaxCondition && fit.beta0.allFinite() &&
                fit.beta1.allFinite();
  return fit;
}

inline SeparateSlopesFit ols_fit(const FeatureMatrix& X, const TreatmentVector& w, const VectorXd& y) {
  return ols_fit(X.values, w, y);
}

inline EstimateReport ols_adjusted_tau(const SeparateSlopesFit& fit, const CounterfactualMeans& om) {
  if (om.omega0.size() != fit.beta0.size() || om.omega1.size() != fit.beta1.size())
    throw InvalidParameter("counterfactual means and coefficients differ in dimension");
  if (!fit.rank_ok)
    throw SingularDesign("per-arm design is ill-conditioned (cond0=" + std::to_string(fit.cond0) +
                         ", cond1=" + std::to_string(fit.cond1) + ")");
  EstimateReport r;
  r.method = "ols";
  r.tau_hat = om.omega1.dot(fit.beta1) - om.omega0.dot(fit.beta0);
  r.diagnostics["n0"] = static_cast<double>(fit.n0);
  r.diagnostics["n1"] = static_cast<double>(fit.n1);
  r.diagnostics["cond0"] = fit.cond0;
  r.diagnostics["cond1"] = fit.cond1;
  return r;
}

// Same estimate written as a shifted difference in means:
// ybar1 - ybar0 + (omega1 - Xbar1)'eta1 - (omega0 - Xbar0)'eta0.
inline double ols_adjusted_tau_shifted(const MatrixXd& X, const TreatmentVector& w, const VectorXd& y,
                                       const SeparateSlopesFit& fit, const CounterfactualMeans& om) {
  const auto m = detail::arm_means(w, y);
  const Eigen::Index p = X.cols();
  VectorXd xbar0 = VectorXd::Zero(p), xbar1 = VectorXd::Zero(p);
  for (std::size_t i = 0; i < w.size(); ++i)
    (w[i] ? xbar1 : xbar0) += X.row(static_cast<Eigen::Index>(i)).transpose();
  xbar0 /= static_cast<double>(m.n0);
  xbar1 /= static_cast<double>(m.n1);
  return m.mean1 - m.mean0 + (om.omega1.tail(p) - xbar1).dot(fit.beta1.tail(p)) -
         (om.omega0.tail(p) - xbar0).dot(fit.beta0.tail(p));
}

struct EstimatorWeights {
  VectorXd a0, a1;                        // per-arm weights, tau = a1'y1 - a0'y0
  std::vector<Eigen::Index> rows0, rows1;  // unit index of each weight
};

// a_w = X_w (X_w'X_w)^{-1} omega_w, computed as Q R^{-T} omega_w.
inline EstimatorWeights estimator_weights(const MatrixXd& X, const TreatmentVector& w, const CounterfactualMeans& om) {
  if (static_cast<std::size_t>(X.rows()) != w.size()) throw InvalidParameter("feature matrix has the wrong number of rows");
  if (om.omega0.size() != X.cols() + 1 || om.omega1.size() != X.cols() + 1)
    throw InvalidParameter("counterfactual means and features differ in dimension");
  EstimatorWeights out;
  out.rows0 = detail::arm_rows(w, 0);
  out.rows1 = detail::arm_rows(w, 1);
  if (out.rows0.empty() || out.rows1.empty()) throw DegenerateArm("an arm has no units", out.rows0.size(), out.rows1.size());
  auto arm = [&](const std::vector<Eigen::Index>& rows, const VectorXd& omega) {
    const Eigen::Index p1 = X.cols() + 1;
    if (static_cast<Eigen::Index>(rows.size()) < p1) throw SingularDesign("arm has fewer units than coefficients");
    const MatrixXd D = detail::design_rows(X, rows);
    Eigen::HouseholderQR<MatrixXd> qr(D);
    const MatrixXd R = qr.matrixQR().topRows(p1).triangularView<Eigen::Upper>();
    if (detail::r_condition(R) > kMaxCondition) throw SingularDesign("per-arm design is ill-conditioned");
    const VectorXd z = R.transpose().triangularView<Eigen::Lower>().solve(omega);
    const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(D.rows(), p1);
    return VectorXd(Q * z);
  };
  out.a0 = arm(out.rows0, om.omega0);
  out.a1 = arm(out.rows1, om.omega1);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-fitting

struct CrossFit {
  EstimateReport report;
  std::size_t folds = 1;
  std::vector<std::size_t> fold;                   // fold of each unit
  std::vector<std::unique_ptr<FittedModel>> mu0;  // one per fold: trained without that fold
  std::vector<std::unique_ptr<FittedModel>> mu1;
  VectorXd residuals;                              // Y_i - mu_{-i}^{(W_i)}(X_i)
};

struct CrossFitOptions {
  std::size_t max_refolds = 10;
};

namespace detail {

inline std::vector<std::size_t> draw_folds(std::size_t n, std::size_t K, std::uint64_t seed, std::size_t attempt) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Stream rng(seed, {0xf01d5, attempt});
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  std::vector<std::size_t> fold(n);
  for (std::size_t r = 0; r < n; ++r) fold[perm[r]] = r % K;
  return fold;
}

inline MatrixXd take_rows(const MatrixXd& X, const std::vector<Eigen::Index>& rows) {
  MatrixXd out(static_cast<Eigen::Index>(rows.size()), X.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
  return out;
}

}  // namespace detail

// Evaluates the cross-fitted estimate given already-trained fold models.
inline double crossfit_combine(const CrossFit& cf, const MatrixXd& X, const MatrixXd& X0, const MatrixXd& X1,
                               const TreatmentVector& w, const VectorXd& y, VectorXd* residuals = nullptr) {
  const auto n = static_cast<Eigen::Index>(w.size());
  VectorXd m1c(n), m0c(n), m1o(n), m0o(n);
  for (std::size_t k = 0; k < cf.folds; ++k) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n; ++i)
      if (cf.fold[static_cast<std::size_t>(i)] == k) rows.push_back(i);
    if (rows.empty()) continue;
    const VectorXd a = cf.mu1[k]->predict(detail::take_rows(X1, rows));
    const VectorXd b = cf.mu0[k]->predict(detail::take_rows(X0, rows));
    const MatrixXd Xk = detail::take_rows(X, rows);
    const VectorXd c = cf.mu1[k]->predict(Xk);
    const VectorXd d = cf.mu0[k]->predict(Xk);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto rr = static_cast<Eigen::Index>(r);
      m1c[rows[r]] = a[rr];
      m0c[rows[r]] = b[rr];
      m1o[rows[r]] = c[rr];
      m0o[rows[r]] = d[rr];
    }
  }
  double cm = 0.0, r1 = 0.0, r0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  if (residuals) residuals->resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cm += m1c[i] - m0c[i];
    if (w[static_cast<std::size_t>(i)]) {
      const double e = y[i] - m1o[i];
      r1 += e;
      ++n1;
      if (residuals) (*residuals)[i] = e;
    } else {
      const double e = y[i] - m0o[i];
      r0 += e;
      ++n0;
      if (residuals) (*residuals)[i] = e;
    }
  }
  if (n0 == 0 || n1 == 0) throw DegenerateArm("an arm has no units", n0, n1);
  return cm / static_cast<double>(n) + r1 / static_cast<double>(n1) - r0 / static_cast<double>(n0);
}

// Trains one model per (fold, arm) on the units outside the fold. K = 1 means
// in-sample fitting on all units.
inline CrossFit crossfit_fit(const Regressor& reg, std::size_t K, const MatrixXd& X, const TreatmentVector& w,
                             const VectorXd& y, std::uint64_t seed, const CrossFitOptions& opt = {}) {
  detail::check_response(w, y);
  const std::size_t n = w.size();
  if (K < 1) throw InvalidParameter("cross-fitting needs K >= 1");
  if (K > n) throw InvalidParameter("more folds than units");
  if (static_cast<std::size_t>(X.rows()) != n) throw InvalidParameter("feature matrix has the wrong number of rows");
  if (w.n0() == 0 || w.n1() == 0) throw DegenerateArm("an arm has no units", w.n0(), w.n1());
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= opt.max_refolds; ++attempt) {
    CrossFit cf;
    cf.folds = K;
    cf.fold = K == 1 ? std::vector<std::size_t>(n, 0) : detail::draw_folds(n, K, seed, attempt);
    bool ok = true;
    try {
      for (std::size_t k = 0; k < K && ok; ++k) {
        std::vector<Eigen::Index> t0, t1;
        for (std::size_t i = 0; i < n; ++i) {
          if (K > 1 && cf.fold[i] == k) continue;
          (w[i] ? t1 : t0).push_back(static_cast<Eigen::Index>(i));
        }
        if (t0.empty() || t1.empty()) {
          ok = false;
          last_error = "training fold with an empty arm";
          break;
        }
        cf.mu0.push_back(reg.fit(detail::take_rows(X, t0), detail::gather(y, t0)));
        cf.mu1.push_back(reg.fit(detail::take_rows(X, t1), detail::gather(y, t1)));
      }
    } catch (const NumericalError& e) {
      ok = false;
      last_error = e.what();
    }
    if (!ok) {
      if (K == 1) break;
      continue;
    }
    cf.report.method = K == 1 ? "crossfit-insample" : "crossfit";
    cf.report.diagnostics["folds"] = static_cast<double>(K);
    cf.report.diagnostics["refolds"] = static_cast<double>(attempt);
    cf.report.diagnostics["n0"] = static_cast<double>(w.n0());
    cf.report.diagnostics["n1"] = static_cast<double>(w.n1());
    return cf;
  }
  throw DegenerateArm("cross-fitting failed after refolding: " + last_error, w.n0(), w.n1());
}

inline CrossFit crossfit_adjusted(const Regressor& reg, std::size_t K, const MatrixXd& X, const MatrixXd& X0,
                                  const MatrixXd& X1, const TreatmentVector& w, const VectorXd& y,
                                  std::uint64_t seed, const CrossFitOptions& opt = {}) {
  if (X0.rows() != X.rows() || X1.rows() != X.rows() || X0.cols() != X.cols() || X1.cols() != X.cols())
    throw InvalidParameter("counterfactual matrices must match the observed feature matrix");
  CrossFit cf = crossfit_fit(reg, K, X, w, y, seed, opt);
  cf.report.tau_hat = crossfit_combine(cf, X, X0, X1, w, y, &cf.residuals);
  return cf;
}

inline EstimateReport crossfit_adjusted_tau(const Regressor& reg, std::size_t K, const MatrixXd& X,
                                            const MatrixXd& X0, const MatrixXd& X1, const TreatmentVector& w,
                                            const VectorXd& y, std::uint64_t seed, const CrossFitOptions& opt = {}) {
  return crossfit_adjusted(reg, K, X, X0, X1, w, y, seed, opt).report;
}

// The no-interference cross-estimator: both potential-outcome predictions are
// evaluated at the observed covariates.
inline double crossfit_sutva_tau(const Regressor& reg, std::size_t K, const MatrixXd& X, const TreatmentVector& w,
                                 const VectorXd& y, std::uint64_t seed, const CrossFitOptions& opt = {}) {
  const CrossFit cf = crossfit_fit(reg, K, X, w, y, seed, opt);
  const auto n = static_cast<Eigen::Index>(w.size());
  double a = 0.0, r1 = 0.0, r0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t k = cf.fold[static_cast<std::size_t>(i)];
    const MatrixXd xi = X.row(i);
    const double m1 = cf.mu1[k]->predict(xi)[0];
    const double m0 = cf.mu0[k]->predict(xi)[0];
    a += m1 - m0;
    if (w[static_cast<std::size_t>(i)]) r1 += y[i] - m1;
    else r0 += y[i] - m0;
  }
  return a / static_cast<double>(n) + r1 / static_cast<double>(w.n1()) - r0 / static_cast<double>(w.n0());
}

}  // namespace netgate

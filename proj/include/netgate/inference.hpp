#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "netgate/design.hpp"
#include "netgate/error.hpp"
#include "netgate/estimators.hpp"
#include "netgate/features.hpp"
#include "netgate/parallel.hpp"
#include "netgate/predictors.hpp"
#include "netgate/random.hpp"

namespace netgate {

// ---------------------------------------------------------------------------
// Monte-Carlo moments of the inverse Gram matrices

struct GammaEstimate {
  MatrixXd gamma0, gamma1;        // mean of (X_w'X_w)^{-1}
  MatrixXd normalized0, normalized1;  // mean of (X_w'X_w / N_w)^{-1}
  MatrixXd mcse0, mcse1;          // elementwise Monte-Carlo standard errors of gamma0/gamma1
  std::size_t B = 0;
  std::size_t used0 = 0, used1 = 0;  // replicates contributing to each arm
  std::size_t singular_skips = 0;    // arm draws dropped as singular, both arms combined
};

namespace detail {

struct GammaAccumulator {
  MatrixXd sum0, sum1, sq0, sq1, nsum0, nsum1;
  std::size_t used0 = 0, used1 = 0, skips = 0;

  explicit GammaAccumulator(Eigen::Index d)
      : sum0(MatrixXd::Zero(d, d)), sum1(MatrixXd::Zero(d, d)), sq0(MatrixXd::Zero(d, d)),
        sq1(MatrixXd::Zero(d, d)), nsum0(MatrixXd::Zero(d, d)), nsum1(MatrixXd::Zero(d, d)) {}

  void merge(const GammaAccumulator& o) {
    sum0 += o.sum0;
    sum1 += o.sum1;
    sq0 += o.sq0;
    sq1 += o.sq1;
    nsum0 += o.nsum0;
    nsum1 += o.nsum1;
    used0 += o.used0;
    used1 += o.used1;
    skips += o.skips;
  }
};

// (D'D)^{-1} = R^{-1} R^{-T}; nullopt when the arm is too small or too
// ill-conditioned to invert reliably.
inline std::optional<MatrixXd> inverse_gram(const MatrixXd& D) {
  const Eigen::Index p1 = D.cols();
  if (D.rows() < p1) return std::nullopt;
  Eigen::HouseholderQR<MatrixXd> qr(D);
  const MatrixXd R = qr.matrixQR().topRows(p1).triangularView<Eigen::Upper>();
  if (!(r_condition(R) <= kMaxCondition)) return std::nullopt;
  const MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(MatrixXd::Identity(p1, p1));
  MatrixXd G = Rinv * Rinv.transpose();
  return MatrixXd(0.5 * (G + G.transpose()));
}

}  // namespace detail

inline GammaEstimate mc_gamma(const FeatureBuilder& fb, double pi, std::size_t B, std::uint64_t seed,
                              std::size_t threads = 1) {
  if (B < 1) throw InvalidParameter("Monte-Carlo replicate count must be at least 1");
  const std::size_t n = fb.units();
  const auto d = static_cast<Eigen::Index>(fb.dim() + 1);
  const std::uint64_t design_seed = derive_key(seed, {0x6a44a});
  constexpr std::size_t chunk = 256;
  const std::size_t chunks = (B + chunk - 1) / chunk;
  std::vector<detail::GammaAccumulator> parts(chunks, detail::GammaAccumulator(d));
  parallel_for(chunks, threads, [&](std::size_t c) {
    auto& acc = parts[c];
    MatrixXd X;
    for (std::size_t b = c * chunk; b < std::min(B, (c + 1) * chunk); ++b) {
      const auto w = bernoulli_assign(n, pi, design_seed, b);
      fb.build_into(w, X);
      for (int arm = 0; arm < 2; ++arm) {
        const auto rows = detail::arm_rows(w, arm);
        auto G = detail::inverse_gram(detail::design_rows(X, rows));
        if (!G) {
          ++acc.skips;
          continue;
        }
        const double nw = static_cast<double>(rows.size());
        if (arm == 0) {
          acc.sum0 += *G;
          acc.sq0 += G->cwiseAbs2();
          acc.nsum0 += nw * *G;
          ++acc.used0;
        } else {
          acc.sum1 += *G;
          acc.sq1 += G->cwiseAbs2();
          acc.nsum1 += nw * *G;
          ++acc.used1;
        }
      }
    }
  });
  detail::GammaAccumulator total(d);
  for (const auto& p : parts) total.merge(p);
  if (total.used0 == 0 || total.used1 == 0)
    throw NumericalError("every Monte-Carlo replicate had a singular arm");
  GammaEstimate g;
  g.B = B;
  g.used0 = total.used0;
  g.used1 = total.used1;
  g.singular_skips = total.skips;
  auto finish = [](const MatrixXd& sum, const MatrixXd& sq, std::size_t m, MatrixXd& mean, MatrixXd& se) {
    const double dm = static_cast<double>(m);
    mean = sum / dm;
    if (m > 1) {
      MatrixXd var = (sq / dm - mean.cwiseAbs2()) * (dm / (dm - 1.0));
      se = (var.cwiseMax(0.0) / dm).cwiseSqrt();
    } else {
      se = MatrixXd::Zero(mean.rows(), mean.cols());
    }
  };
  finish(total.sum0, total.sq0, total.used0, g.gamma0, g.mcse0);
  finish(total.sum1, total.sq1, total.used1, g.gamma1, g.mcse1);
  g.normalized0 = total.nsum0 / static_cast<double>(total.used0);
  g.normalized1 = total.nsum1 / static_cast<double>(total.used1);
  return g;
}

inline GammaEstimate mc_gamma(const GraphSet& graphs, const std::vector<FeatureRecipe>& recipes, double pi,
                              std::size_t B, std::uint64_t seed,
                              std::shared_ptr<const CovariateTable> covariates = nullptr, std::size_t threads = 1) {
  return mc_gamma(FeatureBuilder(graphs, recipes, std::move(covariates)), pi, B, seed, threads);
}

// ---------------------------------------------------------------------------
// Variance formulas

// Mean squared residual of the separate-slopes fit, divisor n.
inline double residual_variance(const MatrixXd& X, const TreatmentVector& w, const VectorXd& y,
                                const SeparateSlopesFit& fit) {
  detail::check_response(w, y);
  const Eigen::Index p = X.cols();
  if (fit.beta0.size() != p + 1 || fit.beta1.size() != p + 1)
    throw InvalidParameter("fit and feature matrix differ in dimension");
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const VectorXd& b = w[static_cast<std::size_t>(i)] ? fit.beta1 : fit.beta0;
    const double fitted = b[0] + X.row(i).dot(b.tail(p));
    const double e = y[i] - fitted;
    s += e * e;
  }
  return y.size() ? s / static_cast<double>(y.size()) : 0.0;
}

struct PluginVariance {
  double variance = 0.0;
  bool clamped = false;
};

inline PluginVariance plugin_variance_checked(double sigma2_hat, const CounterfactualMeans& om, const GammaEstimate& gam) {
  if (om.omega0.size() != gam.gamma0.rows() || om.omega1.size() != gam.gamma1.rows())
    throw InvalidParameter("counterfactual means and Gamma estimate differ in dimension");
  const double q = om.omega0.dot(gam.gamma0 * om.omega0) + om.omega1.dot(gam.gamma1 * om.omega1);
  PluginVariance out;
  out.variance = sigma2_hat * q;
  if (!(out.variance >= 0.0)) {
    out.variance = 0.0;
    out.clamped = true;
  }
  return out;
}

inline double plugin_variance(double sigma2_hat, const CounterfactualMeans& om, const GammaEstimate& gam) {
  return plugin_variance_checked(sigma2_hat, om, gam).variance;
}

// S0^2/N0 + S1^2/N1 with unbiased within-arm sample variances.
inline double neyman_variance(const TreatmentVector& w, const VectorXd& y) {
  detail::check_response(w, y);
  if (w.n0() < 2 || w.n1() < 2) throw DegenerateArm("Neyman variance needs two units per arm", w.n0(), w.n1());
  const auto m = detail::arm_means(w, y);
  double ss0 = 0.0, ss1 = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double yi = y[static_cast<Eigen::Index>(i)];
    if (w[i]) ss1 += (yi - m.mean1) * (yi - m.mean1);
    else ss0 += (yi - m.mean0) * (yi - m.mean0);
  }
  const double n0 = static_cast<double>(m.n0), n1 = static_cast<double>(m.n1);
  return ss0 / (n0 - 1.0) / n0 + ss1 / (n1 - 1.0) / n1;
}

struct AsymptoticInputs {
  double sigma2 = 1.0;
  double pi = 0.5;
  VectorXd omega0, omega1;  // feature parts only (no intercept)
  VectorXd mu_x;
  MatrixXd sigma_x;
};

// Limit of n Var(tau_hat) under the linear model.
inline double asymptotic_variance(const AsymptoticInputs& in) {
  const Eigen::Index p = in.mu_x.size();
  if (in.omega0.size() != p || in.omega1.size() != p || in.sigma_x.rows() != p || in.sigma_x.cols() != p)
    throw InvalidParameter("asymptotic inputs differ in dimension");
  if (!(in.pi > 0.0 && in.pi < 1.0)) throw InvalidParameter("treatment probability must lie in (0, 1)");
  double v = 1.0 / (in.pi * (1.0 - in.pi));
  if (p > 0) {
    Eigen::LLT<MatrixXd> llt(in.sigma_x);
    if (llt.info() != Eigen::Success) throw SingularDesign("feature covariance is not positive definite");
    const VectorXd d0 = in.omega0 - in.mu_x, d1 = in.omega1 - in.mu_x;
    v += d0.dot(llt.solve(d0)) / (1.0 - in.pi) + d1.dot(llt.solve(d1)) / in.pi;
  }
  return in.sigma2 * v;
}

// ---------------------------------------------------------------------------
// Intervals

enum class IntervalStyle { Gaussian, Percentile };

inline IntervalStyle parse_interval_style(const std::string& s) {
  if (s == "gaussian") return IntervalStyle::Gaussian;
  if (s == "percentile") return IntervalStyle::Percentile;
  throw ConfigError("unknown interval style '" + s + "' (expected gaussian or percentile)");
}

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("quantile probability must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(0.0, 1.0), p);
}

// Linear interpolation between order statistics (the usual "type 7" rule).
inline double empirical_quantile(std::vector<double> v, double p) {
  if (v.empty()) throw InvalidParameter("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline Interval confidence_interval(double tau_hat, double se, double level, IntervalStyle style = IntervalStyle::Gaussian,
                                    std::span<const double> draws = {}) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidParameter("confidence level must lie in (0, 1)");
  if (!(se >= 0.0)) throw InvalidParameter("standard error must be nonnegative");
  const double alpha = 1.0 - level;
  if (style == IntervalStyle::Gaussian) {
    const double z = normal_quantile(1.0 - alpha / 2.0);
    return {tau_hat - z * se, tau_hat + z * se, level};
  }
  if (draws.empty()) throw InvalidParameter("percentile interval needs bootstrap draws");
  std::vector<double> v(draws.begin(), draws.end());
  return {empirical_quantile(v, alpha / 2.0), empirical_quantile(v, 1.0 - alpha / 2.0), level};
}

// ---------------------------------------------------------------------------
// Design-resampling residual bootstrap

struct BootstrapOptions {
  std::size_t B = 200;
  std::uint64_t seed = 1;
  IntervalStyle interval = IntervalStyle::Gaussian;
  double level = 0.9;
  double max_skip_fraction = 0.2;
  std::size_t threads = 1;
};

struct BootstrapResult {
  double se = 0.0;
  Interval ci;
  std::vector<double> draws;
  std::size_t skips = 0;
  double mean = 0.0;
};

// Each replicate draws a fresh W from the design, rebuilds the features,
// predicts from the original fold models, adds residuals resampled with
// replacement and refits the cross-fitted estimator from scratch.
inline BootstrapResult bootstrap_variance(const FeatureBuilder& fb, const Regressor& reg, std::size_t K,
                                          const CrossFit& fit, double tau_hat, double pi,
                                          const BootstrapOptions& opt) {
  if (opt.B < 2) throw InvalidParameter("bootstrap needs B >= 2");
  const std::size_t n = fb.units();
  if (fit.fold.size() != n || static_cast<std::size_t>(fit.residuals.size()) != n)
    throw InvalidParameter("cross-fit does not match the feature builder");
  const MatrixXd X0 = fb.counterfactual(0);
  const MatrixXd X1 = fb.counterfactual(1);
  const std::uint64_t design_seed = derive_key(opt.seed, {0xb0075});
  std::vector<std::optional<double>> slots(opt.B);
  parallel_for(opt.B, opt.threads, [&](std::size_t b) {
    const auto w = bernoulli_assign(n, pi, design_seed, b);
    if (w.n0() == 0 || w.n1() == 0) return;
    const MatrixXd Xb = fb.build(w).values;
    VectorXd yb(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < fit.folds; ++k) {
      std::vector<Eigen::Index> rows;
      for (std::size_t i = 0; i < n; ++i)
        if (fit.fold[i] == k) rows.push_back(static_cast<Eigen::Index>(i));
      if (rows.empty()) continue;
      const MatrixXd Xk = detail::take_rows(Xb, rows);
      const VectorXd m1 = fit.mu1[k]->predict(Xk);
      const VectorXd m0 = fit.mu0[k]->predict(Xk);
      for (std::size_t r = 0; r < rows.size(); ++r)
        yb[rows[r]] = w[static_cast<std::size_t>(rows[r])] ? m1[static_cast<Eigen::Index>(r)] : m0[static_cast<Eigen::Index>(r)];
    }
    Stream rng(opt.seed, {0xb007e, b});
    for (std::size_t i = 0; i < n; ++i) yb[static_cast<Eigen::Index>(i)] += fit.residuals[static_cast<Eigen::Index>(rng.below(n))];
    try {
      slots[b] = crossfit_adjusted(reg, K, Xb, X0, X1, w, yb, derive_key(opt.seed, {0xb007f, b})).report.tau_hat;
    } catch (const NumericalError&) {
    }
  });
  BootstrapResult res;
  for (const auto& s : slots) {
    if (s) res.draws.push_back(*s);
    else ++res.skips;
  }
  if (static_cast<double>(res.skips) > opt.max_skip_fraction * static_cast<double>(opt.B))
    throw NumericalError("bootstrap failed in " + std::to_string(res.skips) + " of " + std::to_string(opt.B) +
                         " replicates");
  if (res.draws.size() < 2) throw NumericalError("bootstrap produced fewer than two usable replicates");
  double s = 0.0;
  for (double d : res.draws) s += d;
  res.mean = s / static_cast<double>(res.draws.size());
  double ss = 0.0;
  for (double d : res.draws) ss += (d - res.mean) * (d - res.mean);
  res.se = std::sqrt(ss / static_cast<double>(res.draws.size() - 1));
  res.ci = confidence_interval(tau_hat, res.se, opt.level, opt.interval, res.draws);
  return res;
}

}  // namespace netgate

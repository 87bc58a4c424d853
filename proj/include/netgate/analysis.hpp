#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "netgate/estimators.hpp"
#include "netgate/features.hpp"
#include "netgate/inference.hpp"
#include "netgate/predictors.hpp"

namespace netgate {

enum class Method { DifferenceInMeans, HorvitzThompson, Hajek, Ols, CrossFit };
enum class VarianceMethod { None, Neyman, Plugin, Bootstrap };

inline Method parse_method(const std::string& s) {
  if (s == "dm") return Method::DifferenceInMeans;
  if (s == "ht") return Method::HorvitzThompson;
  if (s == "hajek") return Method::Hajek;
  if (s == "ols") return Method::Ols;
  if (s == "crossfit") return Method::CrossFit;
  throw ConfigError("unknown estimator '" + s + "' (expected dm, ht, hajek, ols or crossfit)");
}

inline std::string method_name(Method m) {
  switch (m) {
    case Method::DifferenceInMeans: return "dm";
    case Method::HorvitzThompson: return "ht";
    case Method::Hajek: return "hajek";
    case Method::Ols: return "ols";
    case Method::CrossFit: return "crossfit";
  }
  return "?";
}

inline VarianceMethod parse_variance(const std::string& s) {
  if (s == "none") return VarianceMethod::None;
  if (s == "neyman") return VarianceMethod::Neyman;
  if (s == "plugin") return VarianceMethod::Plugin;
  if (s == "bootstrap") return VarianceMethod::Bootstrap;
  throw ConfigError("unknown variance method '" + s + "' (expected none, neyman, plugin or bootstrap)");
}

inline VarianceMethod default_variance(Method m) {
  switch (m) {
    case Method::DifferenceInMeans: return VarianceMethod::Neyman;
    case Method::Ols: return VarianceMethod::Plugin;
    case Method::CrossFit: return VarianceMethod::Bootstrap;
    default: return VarianceMethod::None;
  }
}

struct EstimatorSpec {
  std::string label;  // row name in reports; defaults to the method name
  Method method = Method::DifferenceInMeans;
  std::vector<FeatureRecipe> recipes;  // ols / crossfit
  // exposure models
  double q = 0.75;
  std::string exposure_graph = "g";
  unsigned exposure_step = 1;
  // cross-fitting
  RegressorSpec regressor;
  std::size_t folds = 2;
  // variance
  std::optional<VarianceMethod> variance;  // unset: method default
  std::size_t gamma_B = 200;
  std::size_t bootstrap_B = 50;
  IntervalStyle interval = IntervalStyle::Gaussian;

  std::string name() const { return label.empty() ? method_name(method) : label; }
  VarianceMethod variance_method() const { return variance.value_or(default_variance(method)); }
};

// Everything about an estimator that depends only on the graph and design:
// feature builder, counterfactual matrices, exposure propensities and the
// Monte-Carlo Gamma used by the plug-in variance. Built once, then applied to
// many (w, y) pairs, possibly from several threads.
class PreparedEstimator {
 public:
  PreparedEstimator(EstimatorSpec spec, const GraphSet& graphs, double pi,
                    std::shared_ptr<const CovariateTable> covariates, std::uint64_t seed, std::size_t threads = 1)
      : spec_(std::move(spec)), pi_(pi) {
    const auto var = spec_.variance_method();
    switch (spec_.method) {
      case Method::DifferenceInMeans:
        if (var != VarianceMethod::None && var != VarianceMethod::Neyman)
          throw ConfigError(spec_.name() + ": difference in means supports variance none or neyman");
        break;
      case Method::HorvitzThompson:
      case Method::Hajek: {
        if (var != VarianceMethod::None) throw ConfigError(spec_.name() + ": exposure estimators report no variance");
        auto it = graphs.find(spec_.exposure_graph);
        if (it == graphs.end()) throw ConfigError(spec_.name() + ": unknown exposure graph '" + spec_.exposure_graph + "'");
        exposure_graph_ = it->second;
        auto prof = exposure_propensities(*exposure_graph_, spec_.q, pi, spec_.exposure_step);
        p0_ = std::move(prof.p0);
        p1_ = std::move(prof.p1);
        break;
      }
      case Method::Ols:
      case Method::CrossFit: {
        if (spec_.method == Method::Ols && var != VarianceMethod::None && var != VarianceMethod::Plugin)
          throw ConfigError(spec_.name() + ": OLS adjustment supports variance none or plugin");
        if (spec_.method == Method::CrossFit && var != VarianceMethod::None && var != VarianceMethod::Bootstrap)
          throw ConfigError(spec_.name() + ": cross-fit adjustment supports variance none or bootstrap");
        if (spec_.folds < 1) throw ConfigError(spec_.name() + ": folds must be at least 1");
        builder_ = std::make_shared<FeatureBuilder>(graphs, spec_.recipes, std::move(covariates));
        X0_ = builder_->counterfactual(0);
        X1_ = builder_->counterfactual(1);
        om_ = builder_->counterfactual_means();
        isolated_ = builder_->isolated_units();
        if (spec_.method == Method::CrossFit) regressor_ = make_regressor(spec_.regressor);
        if (var == VarianceMethod::Plugin) gamma_ = mc_gamma(*builder_, pi, spec_.gamma_B, derive_key(seed, {0x9a33a}), threads);
        break;
      }
    }
  }

  const EstimatorSpec& spec() const noexcept { return spec_; }
  const std::shared_ptr<FeatureBuilder>& builder() const noexcept { return builder_; }
  const std::optional<CounterfactualMeans>& omega() const noexcept { return om_; }
  const std::optional<GammaEstimate>& gamma() const noexcept { return gamma_; }

  // Worker count for bootstrap replicates inside one estimate() call. Leave
  // at 1 when estimate() itself runs inside a parallel loop.
  void set_inner_threads(std::size_t t) noexcept { inner_threads_ = t; }

  ExposureProfile profile(const TreatmentVector& w) const {
    auto prof = exposure_indicators(*exposure_graph_, spec_.q, w, spec_.exposure_step);
    prof.p0 = p0_;
    prof.p1 = p1_;
    return prof;
  }

  // Point estimate plus the configured standard error and interval.
  // X may be passed in when the caller already built this estimator's features.
  EstimateReport estimate(const TreatmentVector& w, const VectorXd& y, double level, std::uint64_t seed,
                          const MatrixXd* X_in = nullptr) const {
    EstimateReport r;
    const auto var = spec_.variance_method();
    switch (spec_.method) {
      case Method::DifferenceInMeans:
        r = difference_in_means(w, y);
        if (var == VarianceMethod::Neyman) r.se = std::sqrt(neyman_variance(w, y));
        break;
      case Method::HorvitzThompson:
        r = horvitz_thompson(y, profile(w));
        break;
      case Method::Hajek:
        r = hajek(y, profile(w));
        break;
      case Method::Ols: {
        MatrixXd Xl;
        const MatrixXd& X = X_in ? *X_in : (builder_->build_into(w, Xl), Xl);
        const auto fit = ols_fit(X, w, y);
        r = ols_adjusted_tau(fit, *om_);
        if (var == VarianceMethod::Plugin) {
          const double s2 = residual_variance(X, w, y, fit);
          const auto pv = plugin_variance_checked(s2, *om_, *gamma_);
          r.se = std::sqrt(pv.variance);
          r.diagnostics["sigma2_hat"] = s2;
          r.diagnostics["gamma_skips"] = static_cast<double>(gamma_->singular_skips);
          if (pv.clamped) r.diagnostics["variance_clamped"] = 1.0;
        }
        break;
      }
      case Method::CrossFit: {
        MatrixXd Xl;
        const MatrixXd& X = X_in ? *X_in : (builder_->build_into(w, Xl), Xl);
        auto cf = crossfit_adjusted(*regressor_, spec_.folds, X, X0_, X1_, w, y, derive_key(seed, {0xc5f01d}));
        r = cf.report;
        r.diagnostics["regressor_" + regressor_->name()] = 1.0;
        if (var == VarianceMethod::Bootstrap) {
          BootstrapOptions bo;
          bo.B = spec_.bootstrap_B;
          bo.seed = derive_key(seed, {0xb0075eed});
          bo.interval = spec_.interval;
          bo.level = level;
          bo.threads = inner_threads_;
          const auto br = bootstrap_variance(*builder_, *regressor_, spec_.folds, cf, r.tau_hat, pi_, bo);
          r.se = br.se;
          r.ci = br.ci;
          r.diagnostics["bootstrap_skips"] = static_cast<double>(br.skips);
          r.diagnostics["bootstrap_mean"] = br.mean;
          r.bootstrap_draws = br.draws;
        }
        break;
      }
    }
    r.method = spec_.name();
    if (r.se && !r.ci) r.ci = confidence_interval(r.tau_hat, *r.se, level);
    if (builder_) r.diagnostics["isolated_units"] = static_cast<double>(isolated_);
    return r;
  }

 private:
  EstimatorSpec spec_;
  double pi_;
  std::shared_ptr<const Graph> exposure_graph_;
  std::vector<double> p0_, p1_;
  std::shared_ptr<FeatureBuilder> builder_;
  MatrixXd X0_, X1_;
  std::optional<CounterfactualMeans> om_;
  std::shared_ptr<const Regressor> regressor_;
  std::optional<GammaEstimate> gamma_;
  std::size_t isolated_ = 0;
  std::size_t inner_threads_ = 1;
};

}  // namespace netgate

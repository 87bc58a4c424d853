#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "netgate/analysis.hpp"
#include "netgate/design.hpp"
#include "netgate/error.hpp"
#include "netgate/features.hpp"
#include "netgate/format.hpp"
#include "netgate/graph.hpp"
#include "netgate/parallel.hpp"
#include "netgate/random.hpp"

namespace netgate {

// ---------------------------------------------------------------------------
// Response models

// Y = alpha + gamma W + delta ÃW + eps
struct ExogenousLIM {
  double alpha = 0.0, gamma = 1.0, delta = 0.0, sigma = 1.0;
};

// Y = alpha + beta ÃY + gamma W + delta ÃW + eps, solved as a fixed point.
struct EquilibriumLIM {
  double alpha = 0.0, beta = 0.5, gamma = 1.0, delta = 0.0, sigma = 1.0, tol = 1e-10;
};

// Y_0 = 0, Y_t = alpha + beta_direct W + gamma_spill ÃY_{t-1} + eps_t, Y = Y_T.
struct DynamicLIM {
  double alpha = 0.0, beta_direct = 1.0, gamma_spill = 0.5, sigma = 1.0;
  unsigned T = 2;
};

// Y = W (alpha1 + beta1'x) + (1 - W)(alpha0 + beta0'x) + eps over the named recipes.
struct SeparateSlopesLinear {
  std::vector<FeatureRecipe> recipes{FeatureRecipe::frac(1), FeatureRecipe::num(1)};
  double alpha0 = 0.0, alpha1 = 1.0;
  std::vector<double> beta0{0.0, 0.0}, beta1{0.0, 0.0};
  double sigma = 1.0;
};

// intercept + direct_scale (direct_base + E) W + frac_lin frac
//   + num_height / (1 + num_scale exp(-num_rate (num - num_mid)))
//   + frac_height / (frac_base + exp(-frac_rate (frac - frac_mid))) + eps
// with E ~ N(0, het_var) and eps ~ N(0, sigma^2).
struct AvgAggregateNonlinear {
  double intercept = -5.0;
  double direct_scale = 2.0, direct_base = 2.0, het_var = 2.0;
  double frac_lin = 0.03;
  double num_height = 1.0, num_scale = 0.001, num_rate = 0.03, num_mid = 300.0;
  double frac_height = 10.0, frac_base = 3.0, frac_rate = 8.0, frac_mid = 0.4;
  double sigma = 1.0;
  std::string graph = "g";
};

using ResponseModel = std::variant<ExogenousLIM, EquilibriumLIM, DynamicLIM, SeparateSlopesLinear, AvgAggregateNonlinear>;

inline std::string model_name(const ResponseModel& m) {
  static const char* names[] = {"exogenous_lim", "equilibrium_lim", "dynamic_lim", "separate_slopes_linear",
                                "avg_aggregate_nonlinear"};
  return names[m.index()];
}

// Standard normal by Box-Muller, one value per pair of uniforms.
inline double standard_normal(Stream& rng) {
  const double u1 = 1.0 - rng.uniform();  // (0, 1]
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace detail {

inline void fill_noise(Stream& rng, double sigma, std::vector<double>& eps) {
  for (auto& e : eps) e = sigma * standard_normal(rng);
}

inline std::size_t equilibrium_max_iter(double beta, double tol) {
  const double ab = std::abs(beta);
  if (ab == 0.0) return 2;
  return 10 * static_cast<std::size_t>(std::ceil(std::log(tol) / std::log(ab)));
}

inline void validate(const ResponseModel& model) {
  std::visit(
      [](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if (!(m.sigma >= 0.0)) throw InvalidParameter("noise sigma must be nonnegative");
        if constexpr (std::is_same_v<M, EquilibriumLIM>) {
          if (!(std::abs(m.beta) < 1.0)) throw InvalidParameter("equilibrium model needs |beta| < 1");
          if (!(m.tol > 0.0)) throw InvalidParameter("equilibrium tolerance must be positive");
        }
        if constexpr (std::is_same_v<M, DynamicLIM>) {
          if (m.T < 1) throw InvalidParameter("dynamic model needs T >= 1");
        }
        if constexpr (std::is_same_v<M, SeparateSlopesLinear>) {
          if (m.beta0.size() != m.recipes.size() || m.beta1.size() != m.recipes.size())
            throw InvalidParameter("slope vectors must have one entry per recipe");
        }
        if constexpr (std::is_same_v<M, AvgAggregateNonlinear>) {
          if (!(m.het_var >= 0.0)) throw InvalidParameter("heterogeneity variance must be nonnegative");
        }
      },
      model);
}

}  // namespace detail

// Binds a model to a graph set once; generate() can then be called from
// several threads. Noise draws depend only on the seed, never on W, so the
// global-treatment and global-control responses of a paired draw share noise.
class ResponseGenerator {
 public:
  ResponseGenerator(ResponseModel model, GraphSet graphs) : model_(std::move(model)), graphs_(std::move(graphs)) {
    detail::validate(model_);
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, SeparateSlopesLinear>) {
            builder_ = std::make_shared<FeatureBuilder>(graphs_, m.recipes);
          } else if constexpr (std::is_same_v<M, AvgAggregateNonlinear>) {
            builder_ = std::make_shared<FeatureBuilder>(
                graphs_, std::vector<FeatureRecipe>{FeatureRecipe::frac(1, m.graph), FeatureRecipe::num(1, m.graph)});
          } else {
            graph_ = primary();
          }
        },
        model_);
    n_ = builder_ ? builder_->units() : graph_->size();
  }

  std::size_t units() const noexcept { return n_; }
  const ResponseModel& model() const noexcept { return model_; }
  const GraphSet& graphs() const noexcept { return graphs_; }

  VectorXd generate(const TreatmentVector& w, std::uint64_t seed) const {
    if (w.size() != n_) throw InvalidParameter("treatment vector length does not match graph size");
    Stream rng(seed, {0x4e015e});
    std::vector<double> eps(n_);
    VectorXd y(static_cast<Eigen::Index>(n_));
    std::vector<double> wd(n_);
    for (std::size_t i = 0; i < n_; ++i) wd[i] = w[i];
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, ExogenousLIM>) {
            detail::fill_noise(rng, m.sigma, eps);
            const auto aw = normalized_adjacency_apply(*graph_, wd);
            for (std::size_t i = 0; i < n_; ++i) y[idx(i)] = m.alpha + m.gamma * wd[i] + m.delta * aw[i] + eps[i];
          } else if constexpr (std::is_same_v<M, EquilibriumLIM>) {
            detail::fill_noise(rng, m.sigma, eps);
            const auto aw = normalized_adjacency_apply(*graph_, wd);
            std::vector<double> base(n_), cur(n_, 0.0), next(n_);
            for (std::size_t i = 0; i < n_; ++i) base[i] = m.alpha + m.gamma * wd[i] + m.delta * aw[i] + eps[i];
            cur = base;
            const std::size_t max_iter = detail::equilibrium_max_iter(m.beta, m.tol);
            bool converged = false;
            for (std::size_t it = 0; it < max_iter; ++it) {
              normalized_adjacency_apply(*graph_, cur, next);
              double diff = 0.0;
              for (std::size_t i = 0; i < n_; ++i) {
                const double v = base[i] + m.beta * next[i];
                diff = std::max(diff, std::abs(v - cur[i]));
                next[i] = v;
              }
              cur.swap(next);
              if (diff < m.tol) {
                converged = true;
                break;
              }
            }
            if (!converged) throw NumericalError("equilibrium iteration did not converge");
            for (std::size_t i = 0; i < n_; ++i) y[idx(i)] = cur[i];
          } else if constexpr (std::is_same_v<M, DynamicLIM>) {
            std::vector<double> cur(n_, 0.0), z(n_);
            for (unsigned t = 0; t < m.T; ++t) {
              detail::fill_noise(rng, m.sigma, eps);
              normalized_adjacency_apply(*graph_, cur, z);
              for (std::size_t i = 0; i < n_; ++i) cur[i] = m.alpha + m.beta_direct * wd[i] + m.gamma_spill * z[i] + eps[i];
            }
            for (std::size_t i = 0; i < n_; ++i) y[idx(i)] = cur[i];
          } else if constexpr (std::is_same_v<M, SeparateSlopesLinear>) {
            detail::fill_noise(rng, m.sigma, eps);
            MatrixXd X;
            builder_->build_into(w, X);
            for (std::size_t i = 0; i < n_; ++i) {
              double v = w[i] ? m.alpha1 : m.alpha0;
              const auto& b = w[i] ? m.beta1 : m.beta0;
              for (std::size_t j = 0; j < b.size(); ++j) v += b[j] * X(idx(i), static_cast<Eigen::Index>(j));
              y[idx(i)] = v + eps[i];
            }
          } else if constexpr (std::is_same_v<M, AvgAggregateNonlinear>) {
            std::vector<double> het(n_);
            detail::fill_noise(rng, std::sqrt(m.het_var), het);
            detail::fill_noise(rng, m.sigma, eps);
            MatrixXd X;
            builder_->build_into(w, X);
            for (std::size_t i = 0; i < n_; ++i) {
              const double frac = X(idx(i), 0), num = X(idx(i), 1);
              y[idx(i)] = m.intercept + m.direct_scale * (m.direct_base + het[i]) * wd[i] + m.frac_lin * frac +
                          m.num_height / (1.0 + m.num_scale * std::exp(-m.num_rate * (num - m.num_mid))) +
                          m.frac_height / (m.frac_base + std::exp(-m.frac_rate * (frac - m.frac_mid))) + eps[i];
            }
          }
        },
        model_);
    return y;
  }

  // Closed-form GATE where one exists.
  std::optional<double> analytic_gate() const {
    return std::visit(
        [&](const auto& m) -> std::optional<double> {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, ExogenousLIM>) {
            // ÃW is 1 under global treatment except on isolated units
            const double conn = 1.0 - static_cast<double>(graph_->isolated_count()) / static_cast<double>(n_);
            return m.gamma + m.delta * conn;
          } else if constexpr (std::is_same_v<M, SeparateSlopesLinear>) {
            const auto om = builder_->counterfactual_means();
            double t = m.alpha1 - m.alpha0;
            for (std::size_t j = 0; j < m.recipes.size(); ++j)
              t += m.beta1[j] * om.omega1[static_cast<Eigen::Index>(j + 1)] - m.beta0[j] * om.omega0[static_cast<Eigen::Index>(j + 1)];
            return t;
          } else if constexpr (std::is_same_v<M, DynamicLIM> || std::is_same_v<M, EquilibriumLIM>) {
            // noise has mean zero and enters linearly, so the noise-free
            // response at the global vectors is the expected response
            M quiet = m;
            quiet.sigma = 0.0;
            ResponseGenerator g(quiet, graphs_);
            return g.generate(global_vector(n_, 1), 0).mean() - g.generate(global_vector(n_, 0), 0).mean();
          } else {
            return std::nullopt;
          }
        },
        model_);
  }

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  std::shared_ptr<const Graph> primary() const {
    auto it = graphs_.find("g");
    if (it != graphs_.end()) return it->second;
    if (graphs_.size() == 1) return graphs_.begin()->second;
    throw ConfigError("response model needs a graph named 'g'");
  }

  ResponseModel model_;
  GraphSet graphs_;
  std::shared_ptr<const Graph> graph_;
  std::shared_ptr<FeatureBuilder> builder_;
  std::size_t n_ = 0;
};

inline VectorXd gen_response(const ResponseModel& model, const GraphSet& graphs, const TreatmentVector& w,
                             std::uint64_t seed) {
  return ResponseGenerator(model, graphs).generate(w, seed);
}

inline VectorXd gen_response(const ResponseModel& model, const Graph& g, const TreatmentVector& w, std::uint64_t seed) {
  return gen_response(model, single_graph(g), w, seed);
}

// ---------------------------------------------------------------------------
// Ground truth

struct TruthEstimate {
  double tau = 0.0;
  double mc_se = 0.0;
  std::size_t R = 0;
};

// Mean over R draws of mean(Y | W = 1) - mean(Y | W = 0). Paired draws reuse
// one noise seed for both arms.
inline TruthEstimate true_gate_mc(const ResponseGenerator& gen, std::size_t R, std::uint64_t seed, bool paired = true,
                                  std::size_t threads = 1) {
  if (R < 1) throw InvalidParameter("truth replicate count must be at least 1");
  const std::size_t n = gen.units();
  const auto one = global_vector(n, 1), zero = global_vector(n, 0);
  std::vector<double> d(R);
  parallel_for(R, threads, [&](std::size_t r) {
    const std::uint64_t s1 = derive_key(seed, {0x7a0e, r});
    const std::uint64_t s0 = paired ? s1 : derive_key(seed, {0x7a0f, r});
    d[r] = gen.generate(one, s1).mean() - gen.generate(zero, s0).mean();
  });
  TruthEstimate t;
  t.R = R;
  bool constant = true;
  double s = 0.0;
  for (double v : d) {
    s += v;
    constant = constant && v == d[0];
  }
  if (constant) {
    t.tau = d[0];
    return t;
  }
  t.tau = s / static_cast<double>(R);
  if (R > 1) {
    double ss = 0.0;
    for (double v : d) ss += (v - t.tau) * (v - t.tau);
    t.mc_se = std::sqrt(ss / static_cast<double>(R - 1) / static_cast<double>(R));
  }
  return t;
}

inline TruthEstimate true_gate_mc(const ResponseModel& model, const GraphSet& graphs, std::size_t R, std::uint64_t seed,
                                  bool paired = true, std::size_t threads = 1) {
  return true_gate_mc(ResponseGenerator(model, graphs), R, seed, paired, threads);
}

inline TruthEstimate true_gate_mc(const ResponseModel& model, const Graph& g, std::size_t R, std::uint64_t seed,
                                  bool paired = true) {
  return true_gate_mc(model, single_graph(g), R, seed, paired);
}

inline std::optional<double> true_gate_analytic(const ResponseModel& model, const GraphSet& graphs) {
  return ResponseGenerator(model, graphs).analytic_gate();
}

inline std::optional<double> true_gate_analytic(const ResponseModel& model, const Graph& g) {
  return true_gate_analytic(model, single_graph(g));
}

// ---------------------------------------------------------------------------
// Replicated experiments

enum class TruthMode { Auto, Analytic, MonteCarlo };

struct Scenario {
  std::string name = "default";
  ResponseModel model = ExogenousLIM{};
};

struct ExperimentOptions {
  double pi = 0.5;
  std::size_t R = 1000;
  std::uint64_t seed = 1;
  double level = 0.9;
  TruthMode truth = TruthMode::Auto;
  std::size_t truth_R = 2000;
  std::size_t threads = 1;
  double flag_failure_fraction = 0.1;
};

struct ReportRow {
  std::string scenario;
  std::string estimator;
  double tau = 0.0;          // ground truth used for this scenario
  double truth_mc_se = 0.0;  // 0 for analytic truth
  double mean_estimate = 0.0;
  double bias = 0.0;
  double true_se = 0.0;  // empirical SD of the estimates
  std::optional<double> se_ratio;  // mean estimated SE / true_se
  std::optional<double> coverage;
  double rmse = 0.0;
  double bias_mcse = 0.0;  // true_se / sqrt(successful replicates)
  std::size_t successes = 0;
  std::size_t failures = 0;
  bool flagged = false;
  std::vector<double> estimates;  // per replicate, NaN on failure
};

struct SimulationReport {
  std::vector<ReportRow> rows;
};

namespace detail {

struct ReplicateResult {
  bool ok = false;
  double tau_hat = 0.0;
  std::optional<double> se;
  std::optional<Interval> ci;
};

}  // namespace detail

// Runs R simulated experiments per scenario: draw W from the design,
// generate Y, apply every estimator. Replicate r of scenario s uses streams
// keyed by (seed, s, r), and results are reduced in replicate order, so the
// report does not depend on the thread count.
inline SimulationReport run_experiment(const GraphSet& graphs, const std::vector<Scenario>& scenarios,
                                       const std::vector<EstimatorSpec>& estimators, const ExperimentOptions& opt,
                                       std::shared_ptr<const CovariateTable> covariates = nullptr) {
  if (opt.R < 1) throw ConfigError("replicate count must be at least 1");
  if (!(opt.pi > 0.0 && opt.pi < 1.0)) throw ConfigError("treatment probability must lie in (0, 1)");
  if (!(opt.level > 0.0 && opt.level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  if (estimators.empty()) throw ConfigError("no estimators configured");
  if (scenarios.empty()) throw ConfigError("no scenarios configured");

  // Design-only pieces are shared by all scenarios.
  std::vector<PreparedEstimator> prepared;
  prepared.reserve(estimators.size());
  for (std::size_t e = 0; e < estimators.size(); ++e)
    prepared.emplace_back(estimators[e], graphs, opt.pi, covariates, derive_key(opt.seed, {0xe57, e}), opt.threads);

  std::vector<ResponseGenerator> gens;
  for (const auto& sc : scenarios) gens.emplace_back(sc.model, graphs);
  const std::size_t n = gens.front().units();

  SimulationReport report;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto& gen = gens[s];
    TruthEstimate truth;
    std::optional<double> exact;
    if (opt.truth != TruthMode::MonteCarlo) exact = gen.analytic_gate();
    if (opt.truth == TruthMode::Analytic && !exact)
      throw ConfigError("scenario " + scenarios[s].name + ": no closed-form truth for " + model_name(scenarios[s].model));
    if (exact) truth.tau = *exact;
    else truth = true_gate_mc(gen, opt.truth_R, derive_key(opt.seed, {0x7a07, s}), true, opt.threads);

    std::vector<std::vector<detail::ReplicateResult>> res(estimators.size(), std::vector<detail::ReplicateResult>(opt.R));
    const std::uint64_t design_seed = derive_key(opt.seed, {0xde5, s});
    parallel_for(opt.R, opt.threads, [&](std::size_t r) {
      const auto w = bernoulli_assign(n, opt.pi, design_seed, r);
      const VectorXd y = gen.generate(w, derive_key(opt.seed, {0x4e5, s, r}));
      for (std::size_t e = 0; e < prepared.size(); ++e) {
        try {
          const auto rep = prepared[e].estimate(w, y, opt.level, derive_key(opt.seed, {0xe5e, s, r, e}));
          auto& slot = res[e][r];
          slot.ok = std::isfinite(rep.tau_hat);
          slot.tau_hat = rep.tau_hat;
          slot.se = rep.se;
          slot.ci = rep.ci;
        } catch (const NumericalError&) {
          // counted as a failure below
        }
      }
    });

    for (std::size_t e = 0; e < estimators.size(); ++e) {
      ReportRow row;
      row.scenario = scenarios[s].name;
      row.estimator = estimators[e].name();
      row.tau = truth.tau;
      row.truth_mc_se = truth.mc_se;
      double sum = 0.0, se_sum = 0.0;
      std::size_t se_count = 0, ci_count = 0, covered = 0;
      for (const auto& x : res[e]) {
        row.estimates.push_back(x.ok ? x.tau_hat : std::numeric_limits<double>::quiet_NaN());
        if (!x.ok) {
          ++row.failures;
          continue;
        }
        ++row.successes;
        sum += x.tau_hat;
        if (x.se) {
          se_sum += *x.se;
          ++se_count;
        }
        if (x.ci) {
          ++ci_count;
          covered += x.ci->lo <= truth.tau && truth.tau <= x.ci->hi;
        }
      }
      if (row.successes > 0) {
        row.mean_estimate = sum / static_cast<double>(row.successes);
        row.bias = row.mean_estimate - truth.tau;
        double ss = 0.0, sq = 0.0;
        for (const auto& x : res[e]) {
          if (!x.ok) continue;
          ss += (x.tau_hat - row.mean_estimate) * (x.tau_hat - row.mean_estimate);
          sq += (x.tau_hat - truth.tau) * (x.tau_hat - truth.tau);
        }
        const double m = static_cast<double>(row.successes);
        row.true_se = row.successes > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
        row.rmse = std::sqrt(sq / m);
        row.bias_mcse = row.true_se / std::sqrt(m);
        if (se_count > 0 && row.true_se > 0.0) row.se_ratio = se_sum / static_cast<double>(se_count) / row.true_se;
        if (ci_count > 0) row.coverage = static_cast<double>(covered) / static_cast<double>(ci_count);
      }
      row.flagged = static_cast<double>(row.failures) > opt.flag_failure_fraction * static_cast<double>(opt.R);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// Fixed leading columns, then extra context columns.
inline void write_report_csv(std::ostream& out, const SimulationReport& rep) {
  out << "estimator,bias,true_se,se_ratio,coverage,failures,scenario,tau,mean_estimate,rmse,bias_mcse,flagged\n";
  for (const auto& r : rep.rows) {
    out << r.estimator << ',' << format_double(r.bias) << ',' << format_double(r.true_se) << ','
        << format_optional(r.se_ratio) << ',' << format_optional(r.coverage) << ',' << r.failures << ',' << r.scenario
        << ',' << format_double(r.tau) << ',' << format_double(r.mean_estimate) << ',' << format_double(r.rmse) << ','
        << format_double(r.bias_mcse) << ',' << (r.flagged ? 1 : 0) << '\n';
  }
}

}  // namespace netgate

#pragma once

// YAML campaign files for `netgate simulate`. Everything is validated here,
// before any simulation starts.

#include <yaml-cpp/yaml.h>

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "netgate/netgate.hpp"

namespace netgate::cli {

struct Campaign {
  std::string name = "campaign";
  GraphSet graphs;
  std::vector<Scenario> scenarios;
  std::vector<EstimatorSpec> estimators;
  ExperimentOptions options;
  std::string output;  // empty: stdout
};

namespace detail {

template <class T>
T get(const YAML::Node& n, const std::string& key, const std::string& where) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + ": bad value for '" + key + "'");
  }
}

inline void check_keys(const YAML::Node& n, const std::vector<std::string>& allowed, const std::string& where) {
  if (!n.IsMap()) throw ConfigError(where + " must be a mapping");
  for (auto it = n.begin(); it != n.end(); ++it) {
    const auto k = it->first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

inline std::vector<FeatureRecipe> recipes_of(const YAML::Node& n, const std::string& where) {
  if (n.IsScalar()) return parse_recipes(n.as<std::string>());
  if (!n.IsSequence()) throw ConfigError(where + ": recipes must be a list or a comma-separated string");
  std::vector<FeatureRecipe> out;
  for (const auto& r : n) out.push_back(FeatureRecipe::parse(get<std::string>(r, "recipes", where)));
  return out;
}

inline std::shared_ptr<const Graph> graph_of(const YAML::Node& n, const std::string& where,
                                             const std::filesystem::path& base) {
  check_keys(n, {"generator", "n", "k", "p", "seed", "path"}, where);
  if (n["path"]) {
    std::filesystem::path p = get<std::string>(n["path"], "path", where);
    if (p.is_relative()) p = base / p;
    return std::make_shared<const Graph>(load_edge_list_file(p.string()));
  }
  const auto gen = n["generator"] ? get<std::string>(n["generator"], "generator", where) : std::string("watts_strogatz");
  if (gen != "watts_strogatz") throw ConfigError(where + ": unknown generator '" + gen + "'");
  for (const char* k : {"n", "k"})
    if (!n[k]) throw ConfigError(where + ": watts_strogatz needs '" + std::string(k) + "'");
  return std::make_shared<const Graph>(watts_strogatz(get<std::size_t>(n["n"], "n", where), get<std::size_t>(n["k"], "k", where),
                                                      n["p"] ? get<double>(n["p"], "p", where) : 0.1,
                                                      n["seed"] ? get<std::uint64_t>(n["seed"], "seed", where) : 1));
}

// Parameter table for each model: name -> reference into the struct.
inline std::map<std::string, std::function<void(double)>> setters(ResponseModel& model) {
  std::map<std::string, std::function<void(double)>> s;
  std::visit(
      [&](auto& m) {
        using M = std::decay_t<decltype(m)>;
        auto bind = [&](const std::string& k, double& ref) { s[k] = [&ref](double v) { ref = v; }; };
        bind("sigma", m.sigma);
        if constexpr (std::is_same_v<M, ExogenousLIM>) {
          bind("alpha", m.alpha);
          bind("gamma", m.gamma);
          bind("delta", m.delta);
        } else if constexpr (std::is_same_v<M, EquilibriumLIM>) {
          bind("alpha", m.alpha);
          bind("beta", m.beta);
          bind("gamma", m.gamma);
          bind("delta", m.delta);
          bind("tol", m.tol);
        } else if constexpr (std::is_same_v<M, DynamicLIM>) {
          bind("alpha", m.alpha);
          bind("beta_direct", m.beta_direct);
          bind("gamma_spill", m.gamma_spill);
          s["T"] = [&m](double v) {
            if (!(v >= 1.0) || v != std::floor(v)) throw ConfigError("T must be a positive integer");
            m.T = static_cast<unsigned>(v);
          };
        } else if constexpr (std::is_same_v<M, SeparateSlopesLinear>) {
          bind("alpha0", m.alpha0);
          bind("alpha1", m.alpha1);
          for (std::size_t j = 0; j < m.beta0.size(); ++j) {
            bind("beta0[" + std::to_string(j) + "]", m.beta0[j]);
            bind("beta1[" + std::to_string(j) + "]", m.beta1[j]);
          }
        } else if constexpr (std::is_same_v<M, AvgAggregateNonlinear>) {
          bind("intercept", m.intercept);
          bind("direct_scale", m.direct_scale);
          bind("direct_base", m.direct_base);
          bind("het_var", m.het_var);
          bind("frac_lin", m.frac_lin);
          bind("num_height", m.num_height);
          bind("num_scale", m.num_scale);
          bind("num_rate", m.num_rate);
          bind("num_mid", m.num_mid);
          bind("frac_height", m.frac_height);
          bind("frac_base", m.frac_base);
          bind("frac_rate", m.frac_rate);
          bind("frac_mid", m.frac_mid);
        }
      },
      model);
  return s;
}

inline void set_param(ResponseModel& model, const std::string& key, double v, const std::string& where) {
  auto s = setters(model);
  auto it = s.find(key);
  if (it == s.end()) throw ConfigError(where + ": model " + model_name(model) + " has no parameter '" + key + "'");
  it->second(v);
}

inline ResponseModel model_of(const YAML::Node& n) {
  const std::string where = "model";
  if (!n || !n.IsMap()) throw ConfigError("campaign needs a 'model' mapping");
  if (!n["type"]) throw ConfigError("model: missing 'type'");
  const auto type = get<std::string>(n["type"], "type", where);
  ResponseModel model;
  if (type == "exogenous_lim") model = ExogenousLIM{};
  else if (type == "equilibrium_lim") model = EquilibriumLIM{};
  else if (type == "dynamic_lim") model = DynamicLIM{};
  else if (type == "separate_slopes_linear") model = SeparateSlopesLinear{};
  else if (type == "avg_aggregate_nonlinear") model = AvgAggregateNonlinear{};
  else throw ConfigError("model: unknown type '" + type + "'");

  if (auto* ssl = std::get_if<SeparateSlopesLinear>(&model)) {
    if (n["recipes"]) ssl->recipes = recipes_of(n["recipes"], where);
    ssl->beta0.assign(ssl->recipes.size(), 0.0);
    ssl->beta1.assign(ssl->recipes.size(), 0.0);
    for (const char* b : {"beta0", "beta1"}) {
      if (!n[b]) continue;
      auto v = get<std::vector<double>>(n[b], b, where);
      if (v.size() != ssl->recipes.size()) throw ConfigError(std::string("model: ") + b + " needs one entry per recipe");
      (std::string(b) == "beta0" ? ssl->beta0 : ssl->beta1) = v;
    }
  }
  if (auto* nl = std::get_if<AvgAggregateNonlinear>(&model); nl && n["graph"])
    nl->graph = get<std::string>(n["graph"], "graph", where);
  for (auto it = n.begin(); it != n.end(); ++it) {
    const auto k = it->first.as<std::string>();
    if (k == "type" || k == "recipes" || k == "beta0" || k == "beta1" || k == "graph") continue;
    set_param(model, k, get<double>(it->second, k, where), where);
  }
  return model;
}

inline EstimatorSpec estimator_of(const YAML::Node& n, std::size_t index) {
  const std::string where = "estimators[" + std::to_string(index) + "]";
  check_keys(n, {"method", "label", "recipes", "q", "exposure_graph", "exposure_step", "regressor", "lambda", "k",
                 "folds", "variance", "gamma_B", "bootstrap_B", "interval"},
             where);
  if (!n["method"]) throw ConfigError(where + ": missing 'method'");
  EstimatorSpec e;
  e.method = parse_method(get<std::string>(n["method"], "method", where));
  if (n["label"]) e.label = get<std::string>(n["label"], "label", where);
  if (n["recipes"]) e.recipes = recipes_of(n["recipes"], where);
  if (n["q"]) e.q = get<double>(n["q"], "q", where);
  if (n["exposure_graph"]) e.exposure_graph = get<std::string>(n["exposure_graph"], "exposure_graph", where);
  if (n["exposure_step"]) e.exposure_step = get<unsigned>(n["exposure_step"], "exposure_step", where);
  if (n["regressor"]) e.regressor.kind = parse_regressor_kind(get<std::string>(n["regressor"], "regressor", where));
  if (n["lambda"]) e.regressor.lambda = get<double>(n["lambda"], "lambda", where);
  if (n["k"]) e.regressor.k = get<std::size_t>(n["k"], "k", where);
  if (n["folds"]) e.folds = get<std::size_t>(n["folds"], "folds", where);
  if (n["variance"]) e.variance = parse_variance(get<std::string>(n["variance"], "variance", where));
  if (n["gamma_B"]) e.gamma_B = get<std::size_t>(n["gamma_B"], "gamma_B", where);
  if (n["bootstrap_B"]) e.bootstrap_B = get<std::size_t>(n["bootstrap_B"], "bootstrap_B", where);
  if (n["interval"]) e.interval = parse_interval_style(get<std::string>(n["interval"], "interval", where));
  if (e.exposure_step < 1) throw ConfigError(where + ": exposure_step must be at least 1");
  if ((e.method == Method::Hajek || e.method == Method::HorvitzThompson) && !(e.q > 0.5 && e.q <= 1.0))
    throw ConfigError(where + ": q must lie in (0.5, 1]");
  return e;
}

}  // namespace detail

inline Campaign parse_campaign(const YAML::Node& root, const std::filesystem::path& base) {
  detail::check_keys(root, {"name", "seed", "pi", "replicates", "level", "threads", "truth", "truth_replicates",
                            "graphs", "model", "grid", "estimators", "output"},
                     "campaign");
  Campaign c;
  const std::string where = "campaign";
  if (root["name"]) c.name = detail::get<std::string>(root["name"], "name", where);
  auto& o = c.options;
  if (root["seed"]) o.seed = detail::get<std::uint64_t>(root["seed"], "seed", where);
  if (root["pi"]) o.pi = detail::get<double>(root["pi"], "pi", where);
  if (root["replicates"]) o.R = detail::get<std::size_t>(root["replicates"], "replicates", where);
  if (root["level"]) o.level = detail::get<double>(root["level"], "level", where);
  if (root["threads"]) o.threads = detail::get<std::size_t>(root["threads"], "threads", where);
  if (root["truth_replicates"]) o.truth_R = detail::get<std::size_t>(root["truth_replicates"], "truth_replicates", where);
  if (root["truth"]) {
    const auto t = detail::get<std::string>(root["truth"], "truth", where);
    if (t == "auto") o.truth = TruthMode::Auto;
    else if (t == "analytic") o.truth = TruthMode::Analytic;
    else if (t == "mc") o.truth = TruthMode::MonteCarlo;
    else throw ConfigError("campaign: truth must be auto, analytic or mc");
  }
  if (!(o.pi > 0.0 && o.pi < 1.0)) throw ConfigError("campaign: pi must lie in (0, 1)");
  if (!(o.level > 0.0 && o.level < 1.0)) throw ConfigError("campaign: level must lie in (0, 1)");
  if (o.R < 1) throw ConfigError("campaign: replicates must be at least 1");
  if (root["output"]) c.output = detail::get<std::string>(root["output"], "output", where);

  const auto& gnode = root["graphs"];
  if (!gnode || !gnode.IsMap() || gnode.size() == 0) throw ConfigError("campaign needs a non-empty 'graphs' mapping");
  for (auto it = gnode.begin(); it != gnode.end(); ++it) {
    const auto name = it->first.as<std::string>();
    c.graphs[name] = detail::graph_of(it->second, "graphs." + name, base);
  }

  const ResponseModel base_model = detail::model_of(root["model"]);

  // Cartesian product over the grid, first key varying slowest.
  std::vector<std::pair<std::string, std::vector<double>>> axes;
  if (const auto& grid = root["grid"]) {
    if (!grid.IsMap()) throw ConfigError("campaign: grid must be a mapping from parameter to list");
    for (auto it = grid.begin(); it != grid.end(); ++it) {
      const auto k = it->first.as<std::string>();
      auto v = detail::get<std::vector<double>>(it->second, k, "grid");
      if (v.empty()) throw ConfigError("grid: '" + k + "' has no values");
      ResponseModel probe = base_model;
      detail::set_param(probe, k, v.front(), "grid");
      axes.emplace_back(k, std::move(v));
    }
  }
  std::size_t total = 1;
  for (const auto& ax : axes) total *= ax.second.size();
  for (std::size_t idx = 0; idx < total; ++idx) {
    Scenario sc;
    sc.model = base_model;
    std::string name;
    std::size_t rest = idx;
    std::vector<std::size_t> pos(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      pos[a] = rest % axes[a].second.size();
      rest /= axes[a].second.size();
    }
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const double v = axes[a].second[pos[a]];
      detail::set_param(sc.model, axes[a].first, v, "grid");
      name += (a ? ";" : "") + axes[a].first + "=" + format_double(v);
    }
    sc.name = axes.empty() ? c.name : name;
    ResponseGenerator probe(sc.model, c.graphs);  // validates the parameters
    (void)probe;
    c.scenarios.push_back(std::move(sc));
  }

  const auto& enode = root["estimators"];
  if (!enode || !enode.IsSequence() || enode.size() == 0) throw ConfigError("campaign needs a non-empty 'estimators' list");
  for (std::size_t i = 0; i < enode.size(); ++i) c.estimators.push_back(detail::estimator_of(enode[i], i));
  // Resolve recipes and graphs now rather than mid-campaign.
  for (const auto& e : c.estimators) {
    for (const auto& r : e.recipes) {
      if (r.kind == FeatureKind::Static)
        throw ConfigError(e.name() + ": static covariates are not available in simulation campaigns");
      if (!c.graphs.count(r.graph))
        throw ConfigError(e.name() + ": recipe " + r.name() + " names unknown graph '" + r.graph + "'");
    }
    if ((e.method == Method::Hajek || e.method == Method::HorvitzThompson) && !c.graphs.count(e.exposure_graph))
      throw ConfigError(e.name() + ": unknown exposure graph '" + e.exposure_graph + "'");
  }
  return c;
}

inline Campaign load_campaign(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot open config '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  return parse_campaign(root, std::filesystem::path(path).parent_path());
}

}  // namespace netgate::cli

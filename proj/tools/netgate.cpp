// netgate: command-line front end.
//
//   netgate estimate   --graph edges.txt --units units.csv --recipes frac1,num1 --estimator ols
//   netgate simulate   --config configs/table2.cfg
//   netgate propensity --graph edges.txt --q 0.75 --pi 0.5
//   netgate featdist   --graph edges.txt --recipes frac1 --draws 100
//   netgate synth      --out-dir data
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "campaign.hpp"
#include "netgate/netgate.hpp"

namespace {

using namespace netgate;
using nlohmann::json;

std::pair<std::string, std::string> split_graph_arg(const std::string& arg) {
  const auto eq = arg.find('=');
  if (eq == std::string::npos) return {"g", arg};
  if (eq == 0) throw ConfigError("graph argument '" + arg + "' has an empty name");
  return {arg.substr(0, eq), arg.substr(eq + 1)};
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::vector<std::string> graphs;
  std::string units;
  std::string recipes;
  std::string estimator = "ols";
  std::string variance;
  double q = 0.75;
  std::string exposure_graph = "g";
  unsigned exposure_step = 1;
  std::string regressor = "ols";
  double lambda = 1e-3;
  std::size_t knn_k = 20;
  std::size_t folds = 2;
  std::size_t bootstrap_B = 200;
  std::size_t gamma_B = 200;
  std::string interval = "gaussian";
  double level = 0.9;
  double pi = 0.5;
  std::uint64_t seed = 1;
  std::size_t threads = 0;
  std::string draws_out;
};

int run_estimate(const EstimateArgs& a) {
  EstimatorSpec spec;
  spec.method = parse_method(a.estimator);
  spec.recipes = parse_recipes(a.recipes);
  spec.q = a.q;
  spec.exposure_graph = a.exposure_graph;
  spec.exposure_step = a.exposure_step;
  spec.regressor.kind = parse_regressor_kind(a.regressor);
  spec.regressor.lambda = a.lambda;
  spec.regressor.k = a.knn_k;
  spec.folds = a.folds;
  spec.bootstrap_B = a.bootstrap_B;
  spec.gamma_B = a.gamma_B;
  spec.interval = parse_interval_style(a.interval);
  if (!a.variance.empty()) spec.variance = parse_variance(a.variance);
  if (!(a.level > 0.0 && a.level < 1.0)) throw ConfigError("--level must lie in (0, 1)");
  if (!(a.pi > 0.0 && a.pi < 1.0)) throw ConfigError("--pi must lie in (0, 1)");
  if (a.graphs.empty()) throw ConfigError("at least one --graph is required");

  const UnitTable units = read_unit_table_file(a.units);
  GraphSet graphs;
  json edge_diag = json::object();
  for (const auto& arg : a.graphs) {
    auto [name, path] = split_graph_arg(arg);
    std::ifstream in(path);
    if (!in) throw DataError("cannot open edge list '" + path + "'");
    EdgeListDiagnostics d;
    auto g = load_edge_list(in, units.ids, &d);
    edge_diag[name] = {{"self_loops_dropped", d.self_loops_dropped}, {"duplicate_edges", d.duplicate_edges},
                       {"isolated", g.isolated_count()}};
    if (!graphs.emplace(name, std::make_shared<const Graph>(std::move(g))).second)
      throw ConfigError("graph name '" + name + "' given twice");
  }
  const TreatmentVector w(units.w, a.pi);
  const VectorXd y = Eigen::Map<const VectorXd>(units.y.data(), static_cast<Eigen::Index>(units.y.size()));

  PreparedEstimator est(spec, graphs, a.pi, units.covariates, a.seed, a.threads);
  est.set_inner_threads(a.threads);
  const EstimateReport r = est.estimate(w, y, a.level, a.seed);

  json diag = r.diagnostics;
  diag["graphs"] = edge_diag;
  json out = {{"schema_version", 1},
              {"method", r.method},
              {"tau_hat", r.tau_hat},
              {"se", r.se ? json(*r.se) : json(nullptr)},
              {"ci", r.ci ? json::array({r.ci->lo, r.ci->hi}) : json(nullptr)},
              {"level", a.level},
              {"n", w.size()},
              {"n0", w.n0()},
              {"n1", w.n1()},
              {"diagnostics", diag}};
  if (!a.draws_out.empty()) {
    auto f = open_out(a.draws_out);
    f << "tau_b\n";
    for (double d : r.bootstrap_draws) f << format_double(d) << '\n';
  }
  std::cout << out.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string config;
  std::string out;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> seed;
};

int run_simulate(const SimulateArgs& a) {
  auto c = cli::load_campaign(a.config);
  if (a.replicates) c.options.R = *a.replicates;
  if (a.threads) c.options.threads = *a.threads;
  if (a.seed) c.options.seed = *a.seed;
  for (const auto& [name, g] : c.graphs)
    if (g->isolated_count() > 0)
      std::cerr << "warning: graph '" << name << "' has " << g->isolated_count() << " isolated units\n";
  const auto rep = run_experiment(c.graphs, c.scenarios, c.estimators, c.options);
  for (const auto& row : rep.rows)
    if (row.flagged)
      std::cerr << "warning: " << row.estimator << " failed in " << row.failures << " of " << c.options.R
                << " replicates (" << row.scenario << ")\n";
  const std::string path = a.out.empty() ? c.output : a.out;
  if (path.empty() || path == "-") {
    write_report_csv(std::cout, rep);
  } else {
    auto f = open_out(path);
    write_report_csv(f, rep);
  }
  return 0;
}

// ---------------------------------------------------------------------------

// Loads a graph for the analysis commands. With a units file the node set is
// its id column; without one ids are taken as dense indices.
Graph load_graph(const std::string& path, const std::string& units) {
  if (units.empty()) return load_edge_list_file(path);
  const UnitTable t = read_unit_table_file(units);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list '" + path + "'");
  return load_edge_list(in, t.ids);
}

struct PropensityArgs {
  std::string graph;
  std::string units;
  double q = 0.75;
  double pi = 0.5;
  std::string q_grid;
  unsigned step = 1;
};

int run_propensity(const PropensityArgs& a) {
  const Graph g = load_graph(a.graph, a.units);
  std::vector<std::size_t> deg(g.size());
  for (Node i = 0; i < g.size(); ++i) deg[i] = a.step == 1 ? g.degree(i) : neighborhood(g, i, a.step).size();
  if (a.q_grid.empty()) {
    const auto prof = exposure_propensities(g, a.q, a.pi, a.step);
    std::cout << "id,degree,p0,p1\n";
    for (Node i = 0; i < g.size(); ++i)
      std::cout << g.external_id(i) << ',' << deg[i] << ',' << format_double(prof.p0[i]) << ','
                << format_double(prof.p1[i]) << '\n';
    return 0;
  }
  std::vector<double> qs;
  std::stringstream ss(a.q_grid);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      qs.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("--q-grid entry '" + tok + "' is not a number");
    }
  }
  std::sort(qs.begin(), qs.end());
  std::vector<ExposureProfile> profs;
  for (double q : qs) profs.push_back(exposure_propensities(g, q, a.pi, a.step));
  std::cout << "id,degree,q,p0,p1,p1_nonincreasing\n";
  for (Node i = 0; i < g.size(); ++i)
    for (std::size_t k = 0; k < qs.size(); ++k) {
      const bool mono = k == 0 || profs[k].p1[i] <= profs[k - 1].p1[i];
      std::cout << g.external_id(i) << ',' << deg[i] << ',' << format_double(qs[k]) << ','
                << format_double(profs[k].p0[i]) << ',' << format_double(profs[k].p1[i]) << ',' << (mono ? 1 : 0)
                << '\n';
    }
  return 0;
}

// ---------------------------------------------------------------------------

struct FeatdistArgs {
  std::vector<std::string> graphs;
  std::string units;
  std::string recipes = "frac1";
  double pi = 0.5;
  std::size_t draws = 100;
  std::uint64_t seed = 1;
};

int run_featdist(const FeatdistArgs& a) {
  GraphSet graphs;
  for (const auto& arg : a.graphs) {
    auto [name, path] = split_graph_arg(arg);
    graphs[name] = std::make_shared<const Graph>(load_graph(path, a.units));
  }
  const auto recipes = parse_recipes(a.recipes);
  if (recipes.empty()) throw ConfigError("--recipes must name at least one feature");
  FeatureBuilder fb(graphs, recipes);
  const Graph& ref = *graphs.begin()->second;
  std::cout << "source,draw,id";
  for (const auto& r : recipes) std::cout << ',' << r.name();
  std::cout << '\n';
  auto emit = [&](const char* source, std::size_t draw, const MatrixXd& X) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      std::cout << source << ',' << draw << ',' << ref.external_id(static_cast<Node>(i));
      for (Eigen::Index j = 0; j < X.cols(); ++j) std::cout << ',' << format_double(X(i, j));
      std::cout << '\n';
    }
  };
  MatrixXd X;
  for (std::size_t d = 0; d < a.draws; ++d) {
    fb.build_into(bernoulli_assign(fb.units(), a.pi, a.seed, d), X);
    emit("design", d, X);
  }
  emit("global0", 0, fb.counterfactual(0));
  emit("global1", 0, fb.counterfactual(1));
  return 0;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir = "data";
  std::size_t n = 400;
  std::size_t k = 10;
  double p = 0.1;
  double pi = 0.5;
  std::uint64_t seed = 7;
};

// Synthetic field-study fixture: a small-world graph with non-contiguous
// external ids and a units table from the separate-slopes model plus one
// static covariate.
int run_synth(const SynthArgs& a) {
  const Graph base = watts_strogatz(a.n, a.k, a.p, a.seed);
  std::vector<ExternalId> ids(a.n);
  for (std::size_t i = 0; i < a.n; ++i) ids[i] = static_cast<ExternalId>(1000 + 3 * i);
  std::vector<std::pair<Node, Node>> edges;
  for (Node i = 0; i < base.size(); ++i)
    for (Node j : base.neighbors(i))
      if (i < j) edges.emplace_back(i, j);
  const Graph g = Graph::from_edges(a.n, edges, ids);

  const auto w = bernoulli_assign(a.n, a.pi, a.seed, 0);
  SeparateSlopesLinear m;
  m.beta0 = {0.1, 0.01};
  m.beta1 = {0.2, 0.05};
  VectorXd y = gen_response(m, g, w, derive_key(a.seed, {0x5e17}));
  UnitTable t;
  t.ids = ids;
  t.w.assign(w.values().begin(), w.values().end());
  t.covariates->names = {"age"};
  t.covariates->columns.emplace_back();
  Stream rng(a.seed, {0xa6e});
  for (std::size_t i = 0; i < a.n; ++i) {
    const double age = std::round(18.0 + 40.0 * rng.uniform());
    t.covariates->columns[0].push_back(age);
    y[static_cast<Eigen::Index>(i)] += 0.02 * (age - 38.0);
  }
  t.y.assign(y.data(), y.data() + y.size());

  std::filesystem::create_directories(a.out_dir);
  {
    auto f = open_out((std::filesystem::path(a.out_dir) / "edges.txt").string());
    f << "# synthetic small-world graph, n=" << a.n << " k=" << a.k << " p=" << format_double(a.p) << "\n";
    write_edge_list(f, g);
  }
  {
    auto f = open_out((std::filesystem::path(a.out_dir) / "units.csv").string());
    write_unit_table(f, t);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network-interference GATE estimation and simulation"};
  app.require_subcommand(1);

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "estimate the global treatment effect from field data");
  est->add_option("--graph", ea.graphs, "edge list, optionally name=path; repeatable")->required();
  est->add_option("--units", ea.units, "units CSV with header id,w,y[,covariates]")->required();
  est->add_option("--recipes", ea.recipes, "comma-separated features, e.g. frac1,num1,cov:age");
  est->add_option("--estimator", ea.estimator, "dm, ht, hajek, ols or crossfit");
  est->add_option("--variance", ea.variance, "none, neyman, plugin or bootstrap");
  est->add_option("--q", ea.q, "exposure threshold for ht/hajek");
  est->add_option("--exposure-graph", ea.exposure_graph, "graph used for exposure");
  est->add_option("--exposure-step", ea.exposure_step, "neighbourhood step used for exposure");
  est->add_option("--regressor", ea.regressor, "ols, ridge, knn or logistic");
  est->add_option("--lambda", ea.lambda, "ridge penalty (trace-scaled)");
  est->add_option("--knn-k", ea.knn_k, "neighbours for knn");
  est->add_option("--folds", ea.folds, "cross-fitting folds");
  est->add_option("--bootstrap-B", ea.bootstrap_B, "bootstrap replicates");
  est->add_option("--gamma-B", ea.gamma_B, "Monte-Carlo draws for the plug-in variance");
  est->add_option("--interval", ea.interval, "gaussian or percentile");
  est->add_option("--level", ea.level, "confidence level");
  est->add_option("--pi", ea.pi, "design treatment probability");
  est->add_option("--seed", ea.seed, "master seed");
  est->add_option("--threads", ea.threads, "worker cap, 0 = all cores");
  est->add_option("--draws-out", ea.draws_out, "write bootstrap draws to this CSV");

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "run a replicated-experiment campaign");
  sim->add_option("--config", sa.config, "campaign YAML file")->required();
  sim->add_option("--out", sa.out, "report CSV path ('-' for stdout); overrides the config");
  sim->add_option("--replicates", sa.replicates, "override the replicate count");
  sim->add_option("--threads", sa.threads, "worker cap, 0 = all cores");
  sim->add_option("--seed", sa.seed, "override the master seed");

  PropensityArgs pa;
  auto* prop = app.add_subcommand("propensity", "exact q-fractional exposure probabilities per unit");
  prop->add_option("--graph", pa.graph, "edge list")->required();
  prop->add_option("--units", pa.units, "units CSV whose id column defines the node set");
  prop->add_option("--q", pa.q, "exposure threshold");
  prop->add_option("--pi", pa.pi, "treatment probability");
  prop->add_option("--q-grid", pa.q_grid, "comma-separated thresholds; adds a monotonicity column");
  prop->add_option("--step", pa.step, "neighbourhood step");

  FeatdistArgs fa;
  auto* fd = app.add_subcommand("featdist", "feature samples under the design and the global vectors");
  fd->add_option("--graph", fa.graphs, "edge list, optionally name=path; repeatable")->required();
  fd->add_option("--units", fa.units, "units CSV whose id column defines the node set");
  fd->add_option("--recipes", fa.recipes, "comma-separated features");
  fd->add_option("--pi", fa.pi, "treatment probability");
  fd->add_option("--draws", fa.draws, "design draws");
  fd->add_option("--seed", fa.seed, "seed");

  SynthArgs ya;
  auto* syn = app.add_subcommand("synth", "write the synthetic edges.txt/units.csv fixture");
  syn->add_option("--out-dir", ya.out_dir, "output directory");
  syn->add_option("--n", ya.n, "units");
  syn->add_option("--k", ya.k, "lattice degree");
  syn->add_option("--p", ya.p, "rewiring probability");
  syn->add_option("--pi", ya.pi, "treatment probability");
  syn->add_option("--seed", ya.seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::Config);
  }

  try {
    if (*est) return run_estimate(ea);
    if (*sim) return run_simulate(sa);
    if (*prop) return run_propensity(pa);
    if (*fd) return run_featdist(fa);
    if (*syn) return run_synth(ya);
  } catch (const netgate::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const YAML::Exception& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::Config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

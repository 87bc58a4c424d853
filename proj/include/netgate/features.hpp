#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netgate/design.hpp"
#include "netgate/error.hpp"
#include "netgate/graph.hpp"

namespace netgate {

enum class FeatureKind {
  FracTreated,  // share of the step-k neighbourhood that is treated
  NumTreated,   // count of treated units in the step-k neighbourhood
  AdjPower,     // i-th coordinate of Ã^k W
  Static,       // covariate column, constant in W
};

struct FeatureRecipe {
  FeatureKind kind = FeatureKind::FracTreated;
  unsigned step = 1;
  std::string graph = "g";
  std::string column;      // Static only
  bool mask_self = false;  // AdjPower only: drop the W_i contribution

  static FeatureRecipe frac(unsigned step, std::string graph = "g") {
    return {FeatureKind::FracTreated, step, std::move(graph), {}, false};
  }
  static FeatureRecipe num(unsigned step, std::string graph = "g") {
    return {FeatureKind::NumTreated, step, std::move(graph), {}, false};
  }
  static FeatureRecipe adj(unsigned power, std::string graph = "g", bool mask_self = false) {
    return {FeatureKind::AdjPower, power, std::move(graph), {}, mask_self};
  }
  static FeatureRecipe covariate(std::string column) {
    return {FeatureKind::Static, 0, {}, std::move(column), false};
  }

  // Textual form: frac1, num2, adj3, adj2:maskself, cov:age, with an optional
  // "@layer" suffix naming the graph (default "g").
  std::string name() const {
    std::string s;
    switch (kind) {
      case FeatureKind::FracTreated: s = "frac" + std::to_string(step); break;
      case FeatureKind::NumTreated: s = "num" + std::to_string(step); break;
      case FeatureKind::AdjPower:
        s = "adj" + std::to_string(step) + (mask_self ? ":maskself" : "");
        break;
      case FeatureKind::Static: return "cov:" + column;
    }
    if (graph != "g") s += "@" + graph;
    return s;
  }

  static FeatureRecipe parse(std::string_view text) {
    auto bad = [&] { return ConfigError("unrecognised feature recipe '" + std::string(text) + "'"); };
    if (text.rfind("cov:", 0) == 0) {
      if (text.size() == 4) throw bad();
      return covariate(std::string(text.substr(4)));
    }
    FeatureRecipe r;
    std::string_view body = text;
    if (auto at = body.find('@'); at != std::string_view::npos) {
      r.graph = std::string(body.substr(at + 1));
      body = body.substr(0, at);
      if (r.graph.empty()) throw bad();
    }
    if (auto colon = body.find(':'); colon != std::string_view::npos) {
      if (body.substr(colon + 1) != "maskself") throw bad();
      r.mask_self = true;
      body = body.substr(0, colon);
    }
    std::string_view digits;
    if (body.rfind("frac", 0) == 0) {
      r.kind = FeatureKind::FracTreated;
      digits = body.substr(4);
    } else if (body.rfind("num", 0) == 0) {
      r.kind = FeatureKind::NumTreated;
      digits = body.substr(3);
    } else if (body.rfind("adj", 0) == 0) {
      r.kind = FeatureKind::AdjPower;
      digits = body.substr(3);
    } else {
      throw bad();
    }
    if (r.mask_self && r.kind != FeatureKind::AdjPower) throw bad();
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), r.step);
    if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size() || r.step < 1)
      throw bad();
    return r;
  }

  friend bool operator==(const FeatureRecipe&, const FeatureRecipe&) = default;
};

inline std::vector<FeatureRecipe> parse_recipes(std::string_view csv) {
  std::vector<FeatureRecipe> out;
  while (!csv.empty()) {
    auto comma = csv.find(',');
    auto tok = detail::trim(csv.substr(0, comma));
    if (!tok.empty() && tok != "none") out.push_back(FeatureRecipe::parse(tok));
    if (comma == std::string_view::npos) break;
    csv = csv.substr(comma + 1);
  }
  return out;
}

using GraphSet = std::map<std::string, std::shared_ptr<const Graph>>;

inline GraphSet single_graph(Graph g, std::string name = "g") {
  return {{std::move(name), std::make_shared<const Graph>(std::move(g))}};
}

// Unit-level static covariates, rows aligned with graph indices.
struct CovariateTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  const std::vector<double>* find(std::string_view name) const {
    for (std::size_t c = 0; c < names.size(); ++c)
      if (names[c] == name) return &columns[c];
    return nullptr;
  }
};

struct FeatureMatrix {
  Eigen::MatrixXd values;  // n x p, intercept not included
  std::vector<FeatureRecipe> recipes;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Feature means under global control and global treatment, intercept first.
struct CounterfactualMeans {
  Eigen::VectorXd omega0;
  Eigen::VectorXd omega1;
};

// Resolves recipes against a graph set once and then evaluates them for any
// number of treatment vectors. Neighbourhood lists for each (graph, step) are
// precomputed, which is what makes replicate loops cheap.
class FeatureBuilder {
 public:
  FeatureBuilder(GraphSet graphs, std::vector<FeatureRecipe> recipes,
                 std::shared_ptr<const CovariateTable> covariates = nullptr)
      : graphs_(std::move(graphs)), recipes_(std::move(recipes)), covariates_(std::move(covariates)) {
    if (graphs_.empty() && recipes_.empty()) throw ConfigError("feature builder needs at least one graph");
    std::optional<std::size_t> n;
    for (const auto& [name, g] : graphs_) {
      if (!g) throw ConfigError("graph '" + name + "' is null");
      if (n && *n != g->size()) throw ConfigError("all graphs must share one vertex set");
      n = g->size();
    }
    n_ = n.value_or(0);
    for (const auto& r : recipes_) {
      Column col;
      if (r.kind == FeatureKind::Static) {
        const std::vector<double>* src = covariates_ ? covariates_->find(r.column) : nullptr;
        if (!src) throw ConfigError("unknown covariate column '" + r.column + "'");
        if (graphs_.empty()) n_ = src->size();
        if (src->size() != n_) throw ConfigError("covariate '" + r.column + "' has wrong length");
        col.covariate = src;
      } else {
        auto it = graphs_.find(r.graph);
        if (it == graphs_.end()) throw ConfigError("recipe " + r.name() + " names unknown graph '" + r.graph + "'");
        if (r.step < 1) throw ConfigError("recipe step must be at least 1");
        col.graph = it->second.get();
        if (r.kind == FeatureKind::AdjPower) {
          if (r.mask_self) col.self_weight = return_weights(*col.graph, r.step);
        } else {
          col.hood = &hood(r.graph, *col.graph, r.step);
        }
      }
      columns_.push_back(col);
    }
  }

  std::size_t units() const noexcept { return n_; }
  std::size_t dim() const noexcept { return recipes_.size(); }
  const std::vector<FeatureRecipe>& recipes() const noexcept { return recipes_; }
  const GraphSet& graphs() const noexcept { return graphs_; }
  const std::shared_ptr<const CovariateTable>& covariates() const noexcept { return covariates_; }

  // Units whose neighbourhood for some graph-based recipe is empty; their
  // fraction features are defined as 0.
  std::size_t isolated_units() const {
    std::vector<char> iso(n_, 0);
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const auto& col = columns_[c];
      if (col.hood) {
        for (std::size_t i = 0; i < n_; ++i) iso[i] |= col.hood->offsets[i + 1] == col.hood->offsets[i];
      } else if (col.graph) {
        for (std::size_t i = 0; i < n_; ++i) iso[i] |= col.graph->degree(static_cast<Node>(i)) == 0;
      }
    }
    return static_cast<std::size_t>(std::count(iso.begin(), iso.end(), 1));
  }

  void build_into(const TreatmentVector& w, Eigen::MatrixXd& out) const {
    if (w.size() != n_) throw InvalidParameter("treatment vector length does not match graph size");
    out.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(recipes_.size()));
    std::vector<double> buf, tmp;
    for (std::size_t c = 0; c < columns_.size(); ++c) {
      const auto& r = recipes_[c];
      const auto& col = columns_[c];
      auto dst = out.col(static_cast<Eigen::Index>(c));
      switch (r.kind) {
        case FeatureKind::FracTreated:
        case FeatureKind::NumTreated: {
          const auto& h = *col.hood;
          const bool frac = r.kind == FeatureKind::FracTreated;
          for (std::size_t i = 0; i < n_; ++i) {
            const std::size_t b = h.offsets[i], e = h.offsets[i + 1];
            std::size_t treated = 0;
            for (std::size_t k = b; k < e; ++k) treated += w[h.members[k]];
            dst[static_cast<Eigen::Index>(i)] =
                frac ? (e > b ? static_cast<double>(treated) / static_cast<double>(e - b) : 0.0)
                     : static_cast<double>(treated);
          }
          break;
        }
        case FeatureKind::AdjPower: {
          buf.assign(n_, 0.0);
          for (std::size_t i = 0; i < n_; ++i) buf[i] = w[i];
          tmp.resize(n_);
          for (unsigned s = 0; s < r.step; ++s) {
            normalized_adjacency_apply(*col.graph, buf, tmp);
            buf.swap(tmp);
          }
          for (std::size_t i = 0; i < n_; ++i) {
            double v = buf[i];
            if (r.mask_self) v -= col.self_weight[i] * w[i];
            dst[static_cast<Eigen::Index>(i)] = v;
          }
          break;
        }
        case FeatureKind::Static:
          for (std::size_t i = 0; i < n_; ++i) dst[static_cast<Eigen::Index>(i)] = (*col.covariate)[i];
          break;
      }
    }
  }

  FeatureMatrix build(const TreatmentVector& w) const {
    FeatureMatrix fm;
    fm.recipes = recipes_;
    build_into(w, fm.values);
    return fm;
  }

  // X^(0) or X^(1): every graph-based feature evaluated at the constant
  // assignment, static covariates at their observed values.
  Eigen::MatrixXd counterfactual(int arm) const {
    Eigen::MatrixXd out;
    build_into(global_vector(n_, arm), out);
    return out;
  }

  CounterfactualMeans counterfactual_means() const {
    CounterfactualMeans om;
    om.omega0 = with_intercept(counterfactual(0).colwise().mean().transpose());
    om.omega1 = with_intercept(counterfactual(1).colwise().mean().transpose());
    return om;
  }

 private:
  struct Neighbourhoods {
    std::vector<std::size_t> offsets;
    std::vector<Node> members;
  };
  struct Column {
    const Graph* graph = nullptr;
    const Neighbourhoods* hood = nullptr;
    const std::vector<double>* covariate = nullptr;
    std::vector<double> self_weight;
  };

  static Eigen::VectorXd with_intercept(const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size() + 1);
    out[0] = 1.0;
    out.tail(v.size()) = v;
    return out;
  }

  const Neighbourhoods& hood(const std::string& name, const Graph& g, unsigned step) {
    auto key = name + "#" + std::to_string(step);
    auto it = hoods_.find(key);
    if (it != hoods_.end()) return *it->second;
    auto h = std::make_unique<Neighbourhoods>();
    h->offsets.assign(g.size() + 1, 0);
    for (Node i = 0; i < g.size(); ++i) {
      if (step == 1) {
        auto nb = g.neighbors(i);
        h->members.insert(h->members.end(), nb.begin(), nb.end());
      } else {
        auto nb = neighborhood(g, i, step);
        h->members.insert(h->members.end(), nb.begin(), nb.end());
      }
      h->offsets[i + 1] = h->members.size();
    }
    return *hoods_.emplace(key, std::move(h)).first->second;
  }

  // (Ã^k)_ii for every i, by pushing a unit mass k steps from each node.
  static std::vector<double> return_weights(const Graph& g, unsigned k) {
    const std::size_t n = g.size();
    std::vector<double> out(n, 0.0), mass(n, 0.0), next(n, 0.0);
    std::vector<Node> active, touched;
    for (Node i = 0; i < n; ++i) {
      active.assign(1, i);
      mass[i] = 1.0;
      for (unsigned s = 0; s < k; ++s) {
        touched.clear();
        // Ã_{jm} = 1/d_j, so mass flows backwards: row i of Ã^k is obtained by
        // pushing from i with weight 1/d at the source of each hop.
        for (Node j : active) {
          const double dj = static_cast<double>(g.degree(j));
          if (dj == 0.0) continue;
          for (Node m : g.neighbors(j)) {
            if (next[m] == 0.0) touched.push_back(m);
            next[m] += mass[j] / dj;
          }
        }
        for (Node j : active) mass[j] = 0.0;
        active.swap(touched);
        for (Node j : active) {
          mass[j] = next[j];
          next[j] = 0.0;
        }
      }
      out[i] = mass[i];
      for (Node j : active) mass[j] = 0.0;
    }
    return out;
  }

  GraphSet graphs_;
  std::vector<FeatureRecipe> recipes_;
  std::shared_ptr<const CovariateTable> covariates_;
  std::size_t n_ = 0;
  std::map<std::string, std::unique_ptr<Neighbourhoods>> hoods_;
  std::vector<Column> columns_;
};

inline FeatureMatrix build_features(const GraphSet& graphs, const std::vector<FeatureRecipe>& recipes,
                                    const TreatmentVector& w,
                                    std::shared_ptr<const CovariateTable> covariates = nullptr) {
  return FeatureBuilder(graphs, recipes, std::move(covariates)).build(w);
}

inline CounterfactualMeans counterfactual_means(const GraphSet& graphs,
                                                const std::vector<FeatureRecipe>& recipes,
                                                std::shared_ptr<const CovariateTable> covariates = nullptr) {
  return FeatureBuilder(graphs, recipes, std::move(covariates)).counterfactual_means();
}

}  // namespace netgate

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "netgate/error.hpp"
#include "netgate/random.hpp"

namespace netgate {

using Node = std::uint32_t;
using ExternalId = std::int64_t;

// Immutable simple undirected graph in compressed sparse row form.
// Every stored edge carries weight 1.0; only unweighted graphs are built.
class Graph {
 public:
  Graph() = default;

  // Builds from an undirected edge list over dense indices [0, n).
  // Self-loops are dropped and duplicates merged.
  static Graph from_edges(std::size_t n, std::span<const std::pair<Node, Node>> edges,
                          std::vector<ExternalId> ids = {}) {
    std::vector<std::vector<Node>> adj(n);
    for (auto [u, v] : edges) {
      if (u >= n || v >= n) throw InvalidParameter("edge endpoint out of range");
      if (u == v) continue;
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    return from_adjacency(std::move(adj), std::move(ids));
  }

  static Graph from_adjacency(std::vector<std::vector<Node>> adj,
                              std::vector<ExternalId> ids = {}) {
    Graph g;
    const std::size_t n = adj.size();
    g.offsets_.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& row = adj[i];
      std::sort(row.begin(), row.end());
      row.erase(std::unique(row.begin(), row.end()), row.end());
      row.erase(std::remove(row.begin(), row.end(), static_cast<Node>(i)), row.end());
      g.offsets_[i + 1] = g.offsets_[i] + row.size();
    }
    g.targets_.reserve(g.offsets_[n]);
    for (const auto& row : adj) g.targets_.insert(g.targets_.end(), row.begin(), row.end());
    g.weights_.assign(g.targets_.size(), 1.0);
    if (ids.empty()) {
      ids.resize(n);
      for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<ExternalId>(i);
    }
    if (ids.size() != n) throw InvalidParameter("id table size does not match node count");
    g.ids_ = std::move(ids);
    for (std::size_t i = 0; i < n; ++i) {
      if (!g.index_.emplace(g.ids_[i], static_cast<Node>(i)).second)
        throw InvalidParameter("duplicate external id " + std::to_string(g.ids_[i]));
    }
    // Symmetry holds by construction except when a caller passes a one-sided
    // adjacency; check it once so downstream code can rely on it.
    for (std::size_t i = 0; i < n; ++i)
      for (Node j : g.neighbors(static_cast<Node>(i)))
        if (!g.has_edge(j, static_cast<Node>(i)))
          throw InvalidParameter("adjacency is not symmetric");
    return g;
  }

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t num_edges() const noexcept { return targets_.size() / 2; }

  std::size_t degree(Node i) const noexcept { return offsets_[i + 1] - offsets_[i]; }

  std::span<const Node> neighbors(Node i) const noexcept {
    return {targets_.data() + offsets_[i], degree(i)};
  }
  std::span<const double> weights(Node i) const noexcept {
    return {weights_.data() + offsets_[i], degree(i)};
  }

  bool has_edge(Node i, Node j) const noexcept {
    auto row = neighbors(i);
    return std::binary_search(row.begin(), row.end(), j);
  }

  double mean_degree() const noexcept {
    return size() == 0 ? 0.0 : static_cast<double>(targets_.size()) / static_cast<double>(size());
  }

  std::size_t isolated_count() const noexcept {
    std::size_t c = 0;
    for (std::size_t i = 0; i < size(); ++i) c += degree(static_cast<Node>(i)) == 0;
    return c;
  }

  ExternalId external_id(Node i) const noexcept { return ids_[i]; }
  const std::vector<ExternalId>& external_ids() const noexcept { return ids_; }

  std::optional<Node> index_of(ExternalId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  friend bool operator==(const Graph& a, const Graph& b) {
    return a.offsets_ == b.offsets_ && a.targets_ == b.targets_ && a.ids_ == b.ids_;
  }

 private:
  std::vector<std::size_t> offsets_{0};
  std::vector<Node> targets_;
  std::vector<double> weights_;
  std::vector<ExternalId> ids_;
  std::unordered_map<ExternalId, Node> index_;
};

struct EdgeListDiagnostics {
  std::size_t lines = 0;
  std::size_t self_loops_dropped = 0;
  std::size_t duplicate_edges = 0;
};

struct RawEdgeList {
  std::vector<std::pair<ExternalId, ExternalId>> edges;
  ExternalId max_id = -1;
  std::size_t declared_nodes = 0;  // from a "# nodes N" comment, 0 if absent
  EdgeListDiagnostics diag;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_id(std::string_view tok, ExternalId& out) {
  if (tok.empty()) return false;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size() && out >= 0;
}

}  // namespace detail

// Parses "u v" lines. '#' starts a comment line; "# nodes N" additionally
// declares the node count so trailing isolated ids survive a round trip.
inline RawEdgeList parse_edge_list(std::istream& in) {
  RawEdgeList out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::pair<ExternalId, ExternalId>> canonical;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      std::string_view body = detail::trim(s.substr(1));
      if (body.rfind("nodes", 0) == 0) {
        ExternalId n = 0;
        if (detail::parse_id(detail::trim(body.substr(5)), n))
          out.declared_nodes = static_cast<std::size_t>(n);
      }
      continue;
    }
    const auto sep = s.find_first_of(" \t,");
    if (sep == std::string_view::npos) throw ParseError("expected two node ids", lineno);
    std::string_view a = detail::trim(s.substr(0, sep));
    std::string_view b = detail::trim(s.substr(sep + 1));
    if (!b.empty() && b.front() == ',') b = detail::trim(b.substr(1));
    ExternalId u = 0, v = 0;
    if (!detail::parse_id(a, u) || !detail::parse_id(b, v))
      throw ParseError("expected two nonnegative integer node ids, got '" + std::string(s) + "'",
                       lineno);
    ++out.diag.lines;
    out.max_id = std::max({out.max_id, u, v});
    if (u == v) {
      ++out.diag.self_loops_dropped;
      continue;
    }
    out.edges.emplace_back(u, v);
    canonical.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canonical.begin(), canonical.end());
  out.diag.duplicate_edges = static_cast<std::size_t>(
      canonical.end() - std::unique(canonical.begin(), canonical.end()));
  return out;
}

// Node set is {0, ..., max id}; ids that never appear become isolated units.
inline Graph load_edge_list(std::istream& in, EdgeListDiagnostics* diag = nullptr) {
  RawEdgeList raw = parse_edge_list(in);
  const std::size_t n =
      std::max(static_cast<std::size_t>(raw.max_id + 1), raw.declared_nodes);
  std::vector<std::pair<Node, Node>> edges;
  edges.reserve(raw.edges.size());
  for (auto [u, v] : raw.edges) edges.emplace_back(static_cast<Node>(u), static_cast<Node>(v));
  if (diag) *diag = raw.diag;
  return Graph::from_edges(n, edges);
}

// Node set is exactly `ids` (in that order). Edges naming an unknown id are a
// data error that lists the first ten offenders.
inline Graph load_edge_list(std::istream& in, std::span<const ExternalId> ids,
                            EdgeListDiagnostics* diag = nullptr) {
  RawEdgeList raw = parse_edge_list(in);
  std::unordered_map<ExternalId, Node> index;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!index.emplace(ids[i], static_cast<Node>(i)).second)
      throw DataError("duplicate unit id " + std::to_string(ids[i]));
  std::vector<std::pair<Node, Node>> edges;
  std::vector<ExternalId> unknown;
  for (auto [u, v] : raw.edges) {
    auto iu = index.find(u), iv = index.find(v);
    for (auto [it, id] : {std::pair{iu, u}, std::pair{iv, v}})
      if (it == index.end() && std::find(unknown.begin(), unknown.end(), id) == unknown.end())
        unknown.push_back(id);
    if (iu != index.end() && iv != index.end()) edges.emplace_back(iu->second, iv->second);
  }
  if (!unknown.empty()) {
    std::string msg = "edge list references " + std::to_string(unknown.size()) +
                      " id(s) absent from the unit table:";
    for (std::size_t k = 0; k < std::min<std::size_t>(10, unknown.size()); ++k)
      msg += " " + std::to_string(unknown[k]);
    throw DataError(msg);
  }
  if (diag) *diag = raw.diag;
  return Graph::from_edges(ids.size(), edges, {ids.begin(), ids.end()});
}

inline Graph load_edge_list_file(const std::string& path, EdgeListDiagnostics* diag = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list '" + path + "'");
  return load_edge_list(in, diag);
}

// The "# nodes" line is only written when external ids are the dense indices,
// since that is the only case where it round-trips.
inline void write_edge_list(std::ostream& out, const Graph& g) {
  bool dense = true;
  for (Node i = 0; i < g.size() && dense; ++i) dense = g.external_id(i) == static_cast<ExternalId>(i);
  if (dense) out << "# nodes " << g.size() << '\n';
  for (Node i = 0; i < g.size(); ++i)
    for (Node j : g.neighbors(i))
      if (i < j) out << g.external_id(i) << ' ' << g.external_id(j) << '\n';
}

// Ring lattice with k/2 neighbours on each side; each lattice edge (i, i+j)
// is rewired with probability p_rewire to (i, u) for uniform u, redrawing u
// while it would create a self-loop or a duplicate. Edge count stays n*k/2.
inline Graph watts_strogatz(std::size_t n, std::size_t k, double p_rewire, std::uint64_t seed) {
  if (k % 2 != 0) throw InvalidParameter("watts_strogatz: k must be even");
  if (k >= n) throw InvalidParameter("watts_strogatz: k must be smaller than n");
  if (!(p_rewire >= 0.0 && p_rewire <= 1.0))
    throw InvalidParameter("watts_strogatz: rewiring probability must lie in [0, 1]");

  std::vector<std::vector<Node>> adj(n);
  auto has = [&](Node a, Node b) {
    return std::find(adj[a].begin(), adj[a].end(), b) != adj[a].end();
  };
  auto erase = [&](Node a, Node b) {
    adj[a].erase(std::find(adj[a].begin(), adj[a].end(), b));
  };
  for (Node i = 0; i < n; ++i)
    for (std::size_t j = 1; j <= k / 2; ++j) {
      const Node t = static_cast<Node>((i + j) % n);
      adj[i].push_back(t);
      adj[t].push_back(i);
    }

  Stream rng(seed, {0x5757});
  for (std::size_t j = 1; j <= k / 2; ++j)
    for (Node i = 0; i < n; ++i) {
      const Node t = static_cast<Node>((i + j) % n);
      if (rng.uniform() >= p_rewire) continue;
      if (!has(i, t)) continue;  // already rewired away by an earlier step
      if (adj[i].size() >= n - 1) continue;
      Node u;
      do {
        u = static_cast<Node>(rng.below(n));
      } while (u == i || has(i, u));
      erase(i, t);
      erase(t, i);
      adj[i].push_back(u);
      adj[u].push_back(i);
    }
  return Graph::from_adjacency(std::move(adj));
}

// Units reachable from i by a walk of exactly `step` edges, excluding i.
// step = 2 gives {k != i : A_ij A_jk = 1 for some j}, which may overlap the
// one-step neighbourhood.
inline std::vector<Node> neighborhood(const Graph& g, Node i, unsigned step) {
  if (i >= g.size()) throw InvalidParameter("neighborhood: unit index out of range");
  if (step < 1) throw InvalidParameter("neighborhood: step must be at least 1");
  std::vector<Node> frontier(g.neighbors(i).begin(), g.neighbors(i).end());
  std::vector<char> mark(g.size(), 0);
  for (unsigned s = 1; s < step; ++s) {
    std::vector<Node> next;
    for (Node j : frontier)
      for (Node m : g.neighbors(j))
        if (!mark[m]) {
          mark[m] = 1;
          next.push_back(m);
        }
    for (Node m : next) mark[m] = 0;
    frontier = std::move(next);
  }
  std::sort(frontier.begin(), frontier.end());
  frontier.erase(std::remove(frontier.begin(), frontier.end(), i), frontier.end());
  return frontier;
}

// (Ã v)_i = d_i^{-1} sum_{j in N_i} v_j; isolated units map to 0.
inline void normalized_adjacency_apply(const Graph& g, std::span<const double> v,
                                       std::span<double> out) {
  if (v.size() != g.size() || out.size() != g.size())
    throw InvalidParameter("normalized_adjacency_apply: vector length does not match graph");
  for (Node i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    const auto wt = g.weights(i);
    double s = 0.0, wsum = 0.0;
    for (std::size_t e = 0; e < nb.size(); ++e) {
      s += wt[e] * v[nb[e]];
      wsum += wt[e];
    }
    out[i] = wsum > 0.0 ? s / wsum : 0.0;
  }
}

inline std::vector<double> normalized_adjacency_apply(const Graph& g, std::span<const double> v) {
  std::vector<double> out(g.size());
  normalized_adjacency_apply(g, v, out);
  return out;
}

}  // namespace netgate

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperdet/error.hpp"

namespace hyperdet {

using NodeId = std::size_t;
using EdgeId = std::size_t;
using Edge = std::vector<NodeId>;

// Static topology G = (V, E, Omega). Node ids are dense and 0-based; every
// hyperedge is stored sorted without duplicates and has at least two members.
// Duplicate hyperedges are permitted and keep independent weights.
class Hypergraph {
 public:
  Hypergraph() = default;

  explicit Hypergraph(std::size_t n, std::vector<Edge> edges = {}, std::vector<double> weights = {})
      : n_(n), edges_(std::move(edges)), weights_(std::move(weights)) {
    if (weights_.empty()) weights_.assign(edges_.size(), 1.0);
    for (auto& e : edges_) {
      std::sort(e.begin(), e.end());
      e.erase(std::unique(e.begin(), e.end()), e.end());
    }
    validate();
  }

  std::size_t num_nodes() const noexcept { return n_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Edge& edge(EdgeId e) const { return edges_.at(e); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double weight(EdgeId e) const { return weights_.at(e); }

  friend bool operator==(const Hypergraph&, const Hypergraph&) = default;

 private:
  void validate() const {
    if (n_ < 1) throw ConfigError("hypergraph must have at least one node");
    if (weights_.size() != edges_.size())
      throw ConfigError("weight count " + std::to_string(weights_.size()) +
                        " does not match edge count " + std::to_string(edges_.size()));
    for (std::size_t e = 0; e < edges_.size(); ++e) {
      if (edges_[e].size() < 2)
        throw ConfigError("hyperedge " + std::to_string(e) + " has fewer than two members");
      if (edges_[e].back() >= n_)
        throw ConfigError("hyperedge " + std::to_string(e) + " references node " +
                          std::to_string(edges_[e].back()) + " outside [0, " +
                          std::to_string(n_) + ")");
      if (!(weights_[e] >= 0.0) || !std::isfinite(weights_[e]))
        throw ConfigError("hyperedge " + std::to_string(e) + " has a negative or non-finite weight");
    }
  }

  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<double> weights_;
};

// Sparse n x m incidence matrix H in both orientations, ascending ids.
struct IncidenceView {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::vector<std::vector<EdgeId>> node_edges;  // row-wise: edges containing v
  std::vector<std::vector<NodeId>> edge_nodes;  // column-wise: members of e

  bool contains(NodeId v, EdgeId e) const {
    const auto& row = node_edges.at(v);
    return std::binary_search(row.begin(), row.end(), e);
  }
};

inline IncidenceView build_incidence(const Hypergraph& g) {
  IncidenceView h;
  h.num_nodes = g.num_nodes();
  h.num_edges = g.num_edges();
  h.node_edges.resize(h.num_nodes);
  h.edge_nodes = g.edges();
  for (EdgeId e = 0; e < g.num_edges(); ++e)
    for (NodeId v : g.edge(e)) h.node_edges[v].push_back(e);
  return h;
}

struct DegreeVectors {
  std::vector<double> node;  // D_V: sum_e Omega_ee H_ve
  std::vector<double> edge;  // D_E: |e|
};

inline DegreeVectors degrees(const Hypergraph& g) {
  DegreeVectors d;
  d.node.assign(g.num_nodes(), 0.0);
  d.edge.resize(g.num_edges());
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    d.edge[e] = static_cast<double>(g.edge(e).size());
    for (NodeId v : g.edge(e)) d.node[v] += g.weight(e);
  }
  return d;
}

// Pairwise projection: (u, v) with u < v present iff some hyperedge holds both.
inline std::vector<std::pair<NodeId, NodeId>> clique_expansion(const Hypergraph& g) {
  std::vector<std::pair<NodeId, NodeId>> pairs;
  for (const auto& e : g.edges())
    for (std::size_t i = 0; i < e.size(); ++i)
      for (std::size_t j = i + 1; j < e.size(); ++j) pairs.emplace_back(e[i], e[j]);
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

// Clique expansion re-embedded as a hypergraph of size-2 edges with unit weight.
inline Hypergraph clique_expansion_hypergraph(const Hypergraph& g) {
  std::vector<Edge> edges;
  for (auto [u, v] : clique_expansion(g)) edges.push_back({u, v});
  return Hypergraph(g.num_nodes(), std::move(edges));
}

// Adjacency lists of the clique expansion, ascending.
inline std::vector<std::vector<NodeId>> clique_adjacency(const Hypergraph& g) {
  std::vector<std::vector<NodeId>> adj(g.num_nodes());
  for (auto [u, v] : clique_expansion(g)) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

// Hypergraph built from string-labelled edges; labels[id] recovers the name.
struct LabeledHypergraph {
  Hypergraph graph;
  std::vector<std::string> labels;
};

inline LabeledHypergraph from_labeled_edges(const std::vector<std::vector<std::string>>& edges) {
  std::unordered_map<std::string, NodeId> ids;
  LabeledHypergraph out;
  std::vector<Edge> mapped;
  for (const auto& e : edges) {
    Edge m;
    for (const auto& label : e) {
      auto [it, inserted] = ids.try_emplace(label, out.labels.size());
      if (inserted) out.labels.push_back(label);
      m.push_back(it->second);
    }
    mapped.push_back(std::move(m));
  }
  out.graph = Hypergraph(std::max<std::size_t>(out.labels.size(), 1), std::move(mapped));
  return out;
}

// ---------------------------------------------------------------------------
// File I/O.
//
// Text form: first non-comment line "n m", then m lines, each an optional
// "w=<float>" token followed by node ids. Lines starting with '#' are
// comments. A file whose first non-blank character is '{' is read as JSON:
// {"n": 3, "edges": [[0,1],[1,2]], "weights": [1,1]}.
// ---------------------------------------------------------------------------

namespace detail {

inline Hypergraph make_checked(std::size_t n, std::vector<Edge> edges, std::vector<double> weights,
                               const std::vector<std::size_t>& lines) {
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const std::size_t line = e < lines.size() ? lines[e] : 0;
    auto& edge = edges[e];
    std::sort(edge.begin(), edge.end());
    edge.erase(std::unique(edge.begin(), edge.end()), edge.end());
    if (!edge.empty() && edge.back() >= n)
      throw ParseError("node id " + std::to_string(edge.back()) + " out of range for n=" +
                           std::to_string(n),
                       line);
    if (edge.size() < 2) throw ParseError("hyperedge has fewer than two distinct members", line);
    if (!(weights[e] >= 0.0) || !std::isfinite(weights[e]))
      throw ParseError("negative or non-finite hyperedge weight", line);
  }
  if (n < 1) throw ParseError("node count must be at least 1", lines.empty() ? 0 : 1);
  return Hypergraph(n, std::move(edges), std::move(weights));
}

inline long long parse_int(const std::string& tok, std::size_t line) {
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError("expected integer, got '" + tok + "'", line);
  }
  if (pos != tok.size()) throw ParseError("expected integer, got '" + tok + "'", line);
  return v;
}

inline double parse_real(const std::string& tok, std::size_t line) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError("expected number, got '" + tok + "'", line);
  }
  if (pos != tok.size()) throw ParseError("expected number, got '" + tok + "'", line);
  return v;
}

}  // namespace detail

inline Hypergraph hypergraph_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("n") || !j.contains("edges"))
    throw ParseError("hypergraph JSON needs fields 'n' and 'edges'");
  std::vector<Edge> edges;
  std::vector<double> weights;
  try {
    const auto n = j.at("n").get<long long>();
    if (n < 1) throw ParseError("node count must be at least 1");
    for (const auto& e : j.at("edges")) {
      Edge edge;
      for (const auto& v : e) {
        const auto id = v.get<long long>();
        if (id < 0) throw ParseError("negative node id in hyperedge " + std::to_string(edges.size()));
        edge.push_back(static_cast<NodeId>(id));
      }
      edges.push_back(std::move(edge));
    }
    if (j.contains("weights")) weights = j.at("weights").get<std::vector<double>>();
    else weights.assign(edges.size(), 1.0);
    if (weights.size() != edges.size()) throw ParseError("weights length does not match edge count");
    return detail::make_checked(static_cast<std::size_t>(n), std::move(edges), std::move(weights), {});
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("hypergraph JSON: ") + ex.what());
  }
}

inline nlohmann::json hypergraph_to_json(const Hypergraph& g) {
  return {{"n", g.num_nodes()}, {"edges", g.edges()}, {"weights", g.weights()}};
}

inline Hypergraph parse_hypergraph(std::istream& in) {
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return hypergraph_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& ex) {
      throw ParseError(std::string("invalid JSON: ") + ex.what());
    }
  }

  std::istringstream lines(text);
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  long long n = 0, m = 0;
  std::vector<Edge> edges;
  std::vector<double> weights;
  std::vector<std::size_t> edge_lines;
  while (std::getline(lines, line)) {
    ++lineno;
    const auto start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    std::istringstream toks(line);
    std::vector<std::string> tokens;
    for (std::string t; toks >> t;) tokens.push_back(t);
    if (!have_header) {
      if (tokens.size() != 2) throw ParseError("header must be 'n m'", lineno);
      n = detail::parse_int(tokens[0], lineno);
      m = detail::parse_int(tokens[1], lineno);
      if (n < 1 || m < 0) throw ParseError("header counts out of range", lineno);
      have_header = true;
      continue;
    }
    if (static_cast<long long>(edges.size()) == m)
      throw ParseError("more hyperedge lines than declared (" + std::to_string(m) + ")", lineno);
    double w = 1.0;
    std::size_t t0 = 0;
    if (!tokens.empty() && tokens[0].rfind("w=", 0) == 0) {
      w = detail::parse_real(tokens[0].substr(2), lineno);
      t0 = 1;
    }
    Edge e;
    for (std::size_t t = t0; t < tokens.size(); ++t) {
      const auto id = detail::parse_int(tokens[t], lineno);
      if (id < 0 || id >= n)
        throw ParseError("node id " + tokens[t] + " out of range for n=" + std::to_string(n), lineno);
      e.push_back(static_cast<NodeId>(id));
    }
    edges.push_back(std::move(e));
    weights.push_back(w);
    edge_lines.push_back(lineno);
  }
  if (!have_header) throw ParseError("missing 'n m' header", lineno);
  if (static_cast<long long>(edges.size()) != m)
    throw ParseError("declared " + std::to_string(m) + " hyperedges, found " +
                         std::to_string(edges.size()),
                     lineno);
  return detail::make_checked(static_cast<std::size_t>(n), std::move(edges), std::move(weights),
                              edge_lines);
}

inline Hypergraph load_hypergraph(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open hypergraph file '" + path + "'");
  try {
    return parse_hypergraph(in);
  } catch (const ParseError& ex) {
    throw ParseError(path + ": " + ex.what());
  }
}

inline void write_hypergraph(std::ostream& out, const Hypergraph& g) {
  out << g.num_nodes() << ' ' << g.num_edges() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    if (g.weight(e) != 1.0) out << "w=" << g.weight(e) << ' ';
    const auto& members = g.edge(e);
    for (std::size_t i = 0; i < members.size(); ++i) out << (i ? " " : "") << members[i];
    out << '\n';
  }
}

inline void save_hypergraph(const Hypergraph& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write hypergraph file '" + path + "'");
  write_hypergraph(out, g);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace hyperdet

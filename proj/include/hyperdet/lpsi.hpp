#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "hyperdet/error.hpp"
#include "hyperdet/hypergraph.hpp"

// Label-propagation source identification on the clique expansion. Used as
// a directional comparison baseline.
namespace hyperdet {

struct LpsiConfig {
  double alpha = 0.5;
  double tolerance = 1e-6;
  std::size_t max_iterations = 1000;
};

struct LpsiResult {
  std::vector<double> labels;  // converged labels, also used as ranking scores
  std::vector<NodeId> sources;
  std::size_t iterations = 0;
  bool converged = false;
};

// l <- alpha S l + (1 - alpha) l0 with S = D^-1/2 A D^-1/2; sources are the
// spreaders whose label strictly exceeds every neighbor's.
inline LpsiResult lpsi(const Hypergraph& g, const std::vector<std::uint8_t>& states, const LpsiConfig& cfg = {}) {
  if (!(cfg.alpha >= 0.0 && cfg.alpha < 1.0)) throw ConfigError("lpsi alpha must lie in [0, 1)");
  const std::size_t n = g.num_nodes();
  if (states.size() != n) throw ShapeError("lpsi: state vector length does not match node count");
  const auto adj = clique_adjacency(g);
  std::vector<double> inv_sqrt(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    if (!adj[v].empty()) inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(adj[v].size()));

  std::vector<double> l0(n);
  for (std::size_t v = 0; v < n; ++v) l0[v] = states[v] == 1 ? 1.0 : -1.0;
  LpsiResult r;
  r.labels = l0;
  std::vector<double> next(n);
  while (r.iterations < cfg.max_iterations) {
    double diff = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      double acc = 0.0;
      for (NodeId u : adj[v]) acc += inv_sqrt[u] * r.labels[u];
      next[v] = cfg.alpha * inv_sqrt[v] * acc + (1.0 - cfg.alpha) * l0[v];
      diff = std::max(diff, std::abs(next[v] - r.labels[v]));
    }
    r.labels.swap(next);
    ++r.iterations;
    if (diff < cfg.tolerance) {
      r.converged = true;
      break;
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (states[v] != 1) continue;
    bool peak = true;
    for (NodeId u : adj[v])
      if (!(r.labels[v] > r.labels[u])) {
        peak = false;
        break;
      }
    if (peak) r.sources.push_back(v);
  }
  return r;
}

}  // namespace hyperdet

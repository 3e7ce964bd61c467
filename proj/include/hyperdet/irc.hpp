#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hyperdet/diffusion.hpp"
#include "hyperdet/error.hpp"
#include "hyperdet/hypergraph.hpp"
#include "hyperdet/matrix.hpp"
#include "hyperdet/rng.hpp"

namespace hyperdet {

// H' = H || H_ig || H_sp. Column num_base_edges holds the ignorant set and
// column num_base_edges + 1 the spreader set. Either may be empty; both are
// kept so shapes do not depend on the snapshot. With has_dynamic == false the
// two columns are omitted.
struct AugmentedIncidence {
  std::size_t num_nodes = 0;
  std::size_t num_base_edges = 0;
  bool has_dynamic = true;
  std::vector<std::vector<NodeId>> edge_nodes;
  std::vector<std::vector<EdgeId>> node_edges;
  std::vector<double> weights;

  std::size_t num_edges() const { return edge_nodes.size(); }
  EdgeId ignorant_edge() const { return num_base_edges; }
  EdgeId spreader_edge() const { return num_base_edges + 1; }

  std::size_t num_pairs() const {
    std::size_t p = 0;
    for (const auto& e : edge_nodes) p += e.size();
    return p;
  }
};

inline AugmentedIncidence augment_incidence(const Hypergraph& g, const std::vector<std::uint8_t>& states,
                                            bool include_dynamic = true) {
  if (states.size() != g.num_nodes()) throw ShapeError("snapshot size does not match hypergraph");
  AugmentedIncidence h;
  h.num_nodes = g.num_nodes();
  h.num_base_edges = g.num_edges();
  h.has_dynamic = include_dynamic;
  h.edge_nodes = g.edges();
  h.weights = g.weights();
  if (include_dynamic) {
    std::vector<NodeId> ignorant, spreaders;
    for (NodeId v = 0; v < g.num_nodes(); ++v) (states[v] ? spreaders : ignorant).push_back(v);
    h.edge_nodes.push_back(std::move(ignorant));
    h.edge_nodes.push_back(std::move(spreaders));
    h.weights.push_back(1.0);
    h.weights.push_back(1.0);
  }
  h.node_edges.assign(h.num_nodes, {});
  for (EdgeId e = 0; e < h.edge_nodes.size(); ++e)
    for (NodeId v : h.edge_nodes[e]) h.node_edges[v].push_back(e);
  return h;
}

inline AugmentedIncidence augment_incidence(const Hypergraph& g, const Snapshot& s, bool include_dynamic = true) {
  return augment_incidence(g, s.states, include_dynamic);
}

// X^1: +1 for spreaders, -1 otherwise.
inline Vector state_feature(const Snapshot& s) {
  Vector x(s.num_nodes());
  for (std::size_t v = 0; v < s.num_nodes(); ++v) x[v] = s.states[v] ? 1.0 : -1.0;
  return x;
}

// X^2: visible timestamp for spreaders, -1 otherwise.
inline Vector time_feature(const Snapshot& s) {
  Vector x(s.num_nodes());
  for (std::size_t v = 0; v < s.num_nodes(); ++v) x[v] = s.states[v] ? s.timestamps[v] : -1.0;
  return x;
}

struct SubHypergraph {
  Hypergraph graph;
  std::vector<NodeId> to_original;  // dense sub id -> original id
};

// G'_+: base hyperedges restricted to spreaders; restrictions with fewer than
// two members are dropped. Dynamic state columns are not part of it.
inline SubHypergraph infected_subhypergraph(const Hypergraph& g, const std::vector<std::uint8_t>& states) {
  if (states.size() != g.num_nodes()) throw ShapeError("snapshot size does not match hypergraph");
  SubHypergraph sub;
  std::vector<NodeId> local(g.num_nodes(), std::numeric_limits<NodeId>::max());
  for (NodeId v = 0; v < g.num_nodes(); ++v)
    if (states[v]) {
      local[v] = sub.to_original.size();
      sub.to_original.push_back(v);
    }
  if (sub.to_original.empty()) throw ConfigError("infected sub-hypergraph needs at least one spreader");
  std::vector<Edge> edges;
  std::vector<double> weights;
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    Edge r;
    for (NodeId v : g.edge(e))
      if (states[v]) r.push_back(local[v]);
    if (r.size() < 2) continue;
    edges.push_back(std::move(r));
    weights.push_back(g.weight(e));
  }
  sub.graph = Hypergraph(sub.to_original.size(), std::move(edges), std::move(weights));
  return sub;
}

inline SubHypergraph infected_subhypergraph(const Hypergraph& g, const Snapshot& s) {
  return infected_subhypergraph(g, s.states);
}

struct Laplacian {
  Eigen::MatrixXd matrix;
  std::vector<NodeId> nodes;    // included node ids (positive degree), ascending
  std::vector<NodeId> excluded; // zero-degree nodes
};

// L = I - Dv^{-1/2} H Omega De^{-1} H^T Dv^{-1/2} over the nodes of positive
// weighted degree. With Omega = I this is the plain normalized form.
inline Laplacian hypergraph_laplacian(const Hypergraph& g) {
  const auto deg = degrees(g);
  Laplacian lap;
  std::vector<long> index(g.num_nodes(), -1);
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (deg.node[v] > 0.0) {
      index[v] = static_cast<long>(lap.nodes.size());
      lap.nodes.push_back(v);
    } else {
      lap.excluded.push_back(v);
    }
  }
  const auto n = static_cast<Eigen::Index>(lap.nodes.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (EdgeId e = 0; e < g.num_edges(); ++e) {
    if (g.weight(e) == 0.0) continue;
    const double w = g.weight(e) / deg.edge[e];
    for (NodeId u : g.edge(e))
      for (NodeId v : g.edge(e)) a(index[u], index[v]) += w / std::sqrt(deg.node[u] * deg.node[v]);
  }
  lap.matrix = Eigen::MatrixXd::Identity(n, n) - a;
  // Exact symmetry regardless of summation order.
  lap.matrix = 0.5 * (lap.matrix + lap.matrix.transpose()).eval();
  return lap;
}

struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // column j pairs with eigenvalues[j]
  std::vector<Eigen::Index> selected;
};

namespace detail {

// Flip so the largest-magnitude entry is positive; near-ties go to the
// lowest index.
inline void canonical_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  double mag = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]);
    if (a > mag * (1.0 + 1e-9) + 1e-15) {
      mag = a;
      best = i;
    }
  }
  if (v.size() && v[best] < 0.0) v = -v;
}

inline std::string dump_matrix(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << std::setprecision(17) << m;
  return os.str();
}

}  // namespace detail

inline constexpr double kEigenTieTolerance = 1e-10;

// Full symmetric eigendecomposition with deterministic sign and tie ordering.
inline SpectralDecomposition spectral_decomposition(const Eigen::MatrixXd& lap) {
  SpectralDecomposition out;
  if (lap.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success)
    throw NumericError("eigensolver did not converge on Laplacian:\n" + detail::dump_matrix(lap));
  Eigen::MatrixXd vecs = solver.eigenvectors();
  const Eigen::VectorXd& vals = solver.eigenvalues();
  for (Eigen::Index j = 0; j < vecs.cols(); ++j) detail::canonical_sign(vecs.col(j));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(vals.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  // Eigenvalues arrive ascending; reorder each cluster of (near-)equal values
  // lexicographically by eigenvector.
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin + 1;
    while (end < order.size() && vals[order[end]] - vals[order[end - 1]] <= kEigenTieTolerance) ++end;
    std::stable_sort(order.begin() + begin, order.begin() + end, [&](Eigen::Index a, Eigen::Index b) {
      return std::lexicographical_compare(vecs.col(a).data(), vecs.col(a).data() + vecs.rows(),
                                          vecs.col(b).data(), vecs.col(b).data() + vecs.rows());
    });
    begin = end;
  }
  out.eigenvalues.resize(vals.size());
  out.eigenvectors.resize(vecs.rows(), vecs.cols());
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.eigenvalues[static_cast<Eigen::Index>(j)] = vals[order[j]];
    out.eigenvectors.col(static_cast<Eigen::Index>(j)) = vecs.col(order[j]);
  }
  return out;
}

// X^3 for every node of the full graph: spreader rows take eigenvectors
// 1..k of the infected sub-hypergraph Laplacian (index 0 is skipped), padded
// with zeros when fewer exist; isolated spreaders get zero rows and
// non-spreaders are filled with -1.
inline Matrix positional_encoding(const Hypergraph& g, const std::vector<std::uint8_t>& states, std::size_t k) {
  if (k < 1) throw ConfigError("positional dimension k must be at least 1");
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  const auto kk = static_cast<Eigen::Index>(k);
  Matrix pe = Matrix::Constant(n, kk, -1.0);
  if (std::none_of(states.begin(), states.end(), [](auto s) { return s != 0; })) return pe;
  const SubHypergraph sub = infected_subhypergraph(g, states);
  for (NodeId v : sub.to_original) pe.row(static_cast<Eigen::Index>(v)).setZero();
  const Laplacian lap = hypergraph_laplacian(sub.graph);
  if (lap.nodes.size() < 2) return pe;
  const SpectralDecomposition spec = spectral_decomposition(lap.matrix);
  const Eigen::Index available = std::min<Eigen::Index>(kk, spec.eigenvectors.cols() - 1);
  for (std::size_t i = 0; i < lap.nodes.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(sub.to_original[lap.nodes[i]]);
    for (Eigen::Index c = 0; c < available; ++c)
      pe(row, c) = spec.eigenvectors(static_cast<Eigen::Index>(i), c + 1);
  }
  return pe;
}

inline Matrix positional_encoding(const Hypergraph& g, const Snapshot& s, std::size_t k) {
  return positional_encoding(g, s.states, k);
}

// X = X^1 || X^2 || X^3, width 2 + k.
struct FeatureMatrix {
  Matrix values;
  std::size_t k = 0;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t width() const { return static_cast<std::size_t>(values.cols()); }
};

inline FeatureMatrix assemble_features(const Vector& state, const Vector& time, const Matrix& pe) {
  if (state.size() != time.size() || state.size() != pe.rows())
    throw ShapeError("feature blocks have mismatched row counts");
  FeatureMatrix f;
  f.k = static_cast<std::size_t>(pe.cols());
  f.values.resize(state.size(), 2 + pe.cols());
  f.values.col(0) = state;
  f.values.col(1) = time;
  f.values.rightCols(pe.cols()) = pe;
  return f;
}

inline FeatureMatrix build_features(const Hypergraph& g, const Snapshot& s, std::size_t k) {
  return assemble_features(state_feature(s), time_feature(s), positional_encoding(g, s, k));
}

// Zeroes floor(rate * n) uniformly chosen rows. Labels are untouched.
inline FeatureMatrix mask_incomplete(FeatureMatrix f, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("incompleteness rate must lie in [0, 1)");
  const std::size_t n = f.rows();
  const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
  if (count == 0) return f;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> picked;
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  for (auto r : picked) f.values.row(static_cast<Eigen::Index>(r)).setZero();
  return f;
}

inline void write_features_csv(std::ostream& out, const FeatureMatrix& f) {
  out << "state,time";
  for (std::size_t c = 0; c < f.k; ++c) out << ",pe_" << c;
  out << '\n' << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) out << (c ? "," : "") << f.values(r, c);
    out << '\n';
  }
}

inline void save_features_csv(const FeatureMatrix& f, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write feature CSV '" + path + "'");
  write_features_csv(out, f);
}

}  // namespace hyperdet

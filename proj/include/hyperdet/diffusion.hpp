#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperdet/error.hpp"
#include "hyperdet/hypergraph.hpp"
#include "hyperdet/parallel.hpp"
#include "hyperdet/rng.hpp"

namespace hyperdet {

enum class DiffusionModel { IC, SI, SIS, SIR };

inline std::string_view to_string(DiffusionModel m) {
  switch (m) {
    case DiffusionModel::IC: return "IC";
    case DiffusionModel::SI: return "SI";
    case DiffusionModel::SIS: return "SIS";
    case DiffusionModel::SIR: return "SIR";
  }
  return "?";
}

inline DiffusionModel parse_diffusion_model(std::string_view s) {
  if (s == "IC") return DiffusionModel::IC;
  if (s == "SI") return DiffusionModel::SI;
  if (s == "SIS") return DiffusionModel::SIS;
  if (s == "SIR") return DiffusionModel::SIR;
  throw ConfigError("unknown diffusion model '" + std::string(s) + "' (expected IC, SI, SIS or SIR)");
}

struct PropagationConfig {
  DiffusionModel model = DiffusionModel::IC;
  double source_fraction = 0.05;
  // Per-node pairwise probability p_i ~ U(0, max_pairwise_prob), unless
  // fixed_pairwise_prob pins every p_i to one value.
  double max_pairwise_prob = 0.5;
  std::optional<double> fixed_pairwise_prob;
  double group_coeff = 0.3;
  double recovery_prob = 0.1;
  double delta = 0.30;
  int max_steps = 500;
  bool normalize_time = true;
  std::uint64_t seed = 1;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
    };
    if (!(source_fraction > 0.0 && source_fraction < 1.0))
      throw ConfigError("source_fraction must lie in (0, 1)");
    prob(max_pairwise_prob, "max_pairwise_prob");
    if (fixed_pairwise_prob) prob(*fixed_pairwise_prob, "fixed_pairwise_prob");
    prob(group_coeff, "group_coeff");
    prob(recovery_prob, "recovery_prob");
    if (!(delta > 0.0 && delta <= 1.0)) throw ConfigError("delta must lie in (0, 1]");
    if (max_steps < 0) throw ConfigError("max_steps must be non-negative");
  }
};

enum class NodeState : std::uint8_t { Ignorant = 0, Spreader = 1, Recovered = 2 };

struct CascadeState {
  std::vector<NodeState> states;
  std::vector<long> first_infect;  // -1 if never infected
  std::vector<NodeId> sources;
  long step = 0;

  std::size_t spreader_count() const {
    return static_cast<std::size_t>(std::count(states.begin(), states.end(), NodeState::Spreader));
  }
};

struct SnapshotMeta {
  std::uint64_t seed = 0;
  DiffusionModel model = DiffusionModel::IC;
  double delta = 0.0;
  long step = 0;
  bool died_out = false;
  double terminal_fraction = 0.0;

  friend bool operator==(const SnapshotMeta&, const SnapshotMeta&) = default;
};

// Observed state G'(T, N, P) at capture. `states` is binary (1 = spreader).
struct Snapshot {
  std::vector<std::uint8_t> states;
  std::vector<double> timestamps;  // normalized first-infection time, -1 if not a spreader
  std::vector<NodeId> sources;
  SnapshotMeta meta;

  std::size_t num_nodes() const { return states.size(); }
  std::size_t spreader_count() const {
    return static_cast<std::size_t>(std::count(states.begin(), states.end(), std::uint8_t{1}));
  }
  std::vector<std::uint8_t> source_labels() const {
    std::vector<std::uint8_t> y(states.size(), 0);
    for (NodeId s : sources) y.at(s) = 1;
    return y;
  }

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

// ceil(x * n) robust to representation error in x (0.3 * 10 -> 3, not 4).
inline std::size_t fraction_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

inline std::vector<NodeId> sample_sources(std::size_t n, double fraction, Rng& rng) {
  const std::size_t count = std::clamp<std::size_t>(fraction_count(fraction, n), 1, n);
  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), NodeId{0});
  std::vector<NodeId> picked;
  picked.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  return picked;
}

inline std::vector<NodeId> sample_sources(const Hypergraph& g, const PropagationConfig& cfg, Rng& rng) {
  return sample_sources(g.num_nodes(), cfg.source_fraction, rng);
}

// p_tri = coeff * |e cap G+| / |e|
inline double group_pressure_prob(const Edge& e, const std::vector<NodeState>& states, double coeff) {
  if (e.empty()) return 0.0;
  std::size_t infected = 0;
  for (NodeId v : e) infected += states[v] == NodeState::Spreader;
  return coeff * static_cast<double>(infected) / static_cast<double>(e.size());
}

// Synchronous discrete-time cascade on a hypergraph with pairwise and
// group-pressure channels. Immutable topology; the state is owned by the caller.
class CascadeSimulator {
 public:
  CascadeSimulator(const Hypergraph& g, PropagationConfig cfg, std::vector<double> pairwise_probs)
      : graph_(&g),
        cfg_(std::move(cfg)),
        probs_(std::move(pairwise_probs)),
        incidence_(build_incidence(g)),
        neighbors_(clique_adjacency(g)) {
    if (probs_.size() != g.num_nodes()) throw ShapeError("pairwise probability vector has wrong length");
  }

  static std::vector<double> draw_pairwise_probs(std::size_t n, const PropagationConfig& cfg, Rng& rng) {
    std::vector<double> p(n);
    for (auto& x : p)
      x = cfg.fixed_pairwise_prob ? *cfg.fixed_pairwise_prob : uniform01(rng) * cfg.max_pairwise_prob;
    return p;
  }

  CascadeState initial_state(std::vector<NodeId> sources) const {
    CascadeState s;
    const std::size_t n = graph_->num_nodes();
    s.states.assign(n, NodeState::Ignorant);
    s.first_infect.assign(n, -1);
    std::sort(sources.begin(), sources.end());
    for (NodeId v : sources) {
      s.states.at(v) = NodeState::Spreader;
      s.first_infect[v] = 0;
    }
    s.sources = std::move(sources);
    return s;
  }

  // Probability that ignorant node v becomes a spreader during the next step.
  double infection_prob(const CascadeState& s, NodeId v) const {
    double escape = 1.0;
    for (NodeId u : neighbors_[v])
      if (pairwise_eligible(s, u)) escape *= 1.0 - probs_[u];
    for (EdgeId e : incidence_.node_edges[v])
      escape *= 1.0 - group_pressure_prob(graph_->edge(e), s.states, cfg_.group_coeff);
    return 1.0 - escape;
  }

  // One synchronous round; infections and recoveries are both decided from
  // the pre-step state. Returns true when any node changed state.
  bool step(CascadeState& s, Rng& rng) const {
    const std::size_t n = graph_->num_nodes();
    std::vector<NodeId> infected;
    for (NodeId v = 0; v < n; ++v)
      if (s.states[v] == NodeState::Ignorant && bernoulli(rng, infection_prob(s, v))) infected.push_back(v);

    std::vector<NodeId> recovered;
    if (cfg_.model == DiffusionModel::SIS || cfg_.model == DiffusionModel::SIR)
      for (NodeId v = 0; v < n; ++v)
        if (s.states[v] == NodeState::Spreader && bernoulli(rng, cfg_.recovery_prob)) recovered.push_back(v);

    ++s.step;
    for (NodeId v : infected) {
      s.states[v] = NodeState::Spreader;
      if (s.first_infect[v] < 0) s.first_infect[v] = s.step;
    }
    for (NodeId v : recovered)
      s.states[v] = cfg_.model == DiffusionModel::SIS ? NodeState::Ignorant : NodeState::Recovered;
    return !infected.empty() || !recovered.empty();
  }

  // True when no future step can change the state.
  bool absorbing(const CascadeState& s) const {
    const std::size_t spreaders = s.spreader_count();
    if (spreaders == 0) return true;
    const bool recovers = (cfg_.model == DiffusionModel::SIS || cfg_.model == DiffusionModel::SIR) &&
                          cfg_.recovery_prob > 0.0;
    if (recovers) return false;
    for (NodeId v = 0; v < graph_->num_nodes(); ++v)
      if (s.states[v] == NodeState::Ignorant && infection_prob(s, v) > 0.0) return false;
    return true;
  }

  Snapshot run_until_fraction(CascadeState s, Rng& rng, std::uint64_t seed) const {
    const std::size_t n = graph_->num_nodes();
    const std::size_t target = std::max<std::size_t>(1, fraction_count(cfg_.delta, n));
    while (s.spreader_count() < target && s.step < cfg_.max_steps && !absorbing(s)) step(s, rng);
    return capture(s, target, seed);
  }

  const PropagationConfig& config() const { return cfg_; }

 private:
  bool pairwise_eligible(const CascadeState& s, NodeId u) const {
    if (s.states[u] != NodeState::Spreader) return false;
    if (cfg_.model == DiffusionModel::IC) return s.first_infect[u] == s.step;
    return true;
  }

  Snapshot capture(const CascadeState& s, std::size_t target, std::uint64_t seed) const {
    const std::size_t n = graph_->num_nodes();
    Snapshot snap;
    snap.states.resize(n);
    snap.timestamps.assign(n, -1.0);
    for (NodeId v = 0; v < n; ++v) {
      const bool spreader = s.states[v] == NodeState::Spreader;
      snap.states[v] = spreader ? 1 : 0;
      if (!spreader) continue;
      const double t = static_cast<double>(s.first_infect[v]);
      if (!cfg_.normalize_time) snap.timestamps[v] = t;
      else snap.timestamps[v] = s.step > 0 ? t / static_cast<double>(s.step) : 0.0;
    }
    snap.sources = s.sources;
    const std::size_t spreaders = s.spreader_count();
    snap.meta = {seed, cfg_.model, cfg_.delta, s.step, spreaders < target,
                 static_cast<double>(spreaders) / static_cast<double>(n)};
    return snap;
  }

  const Hypergraph* graph_;
  PropagationConfig cfg_;
  std::vector<double> probs_;
  IncidenceView incidence_;
  std::vector<std::vector<NodeId>> neighbors_;
};

// One full cascade from a seed: draws p_i, samples sources, runs to delta.
inline Snapshot simulate_cascade(const Hypergraph& g, const PropagationConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  auto probs = CascadeSimulator::draw_pairwise_probs(g.num_nodes(), cfg, rng);
  auto sources = sample_sources(g, cfg, rng);
  CascadeSimulator sim(g, cfg, std::move(probs));
  return sim.run_until_fraction(sim.initial_state(std::move(sources)), rng, seed);
}

inline Snapshot run_until_fraction(const Hypergraph& g, const PropagationConfig& cfg) {
  return simulate_cascade(g, cfg, cfg.seed);
}

struct Dataset {
  std::vector<Snapshot> train;
  std::vector<Snapshot> test;
  std::size_t redraws = 0;        // died-out cascades replaced by a fresh sub-seed
  std::size_t died_out_kept = 0;  // cascades still died-out after every retry

  friend bool operator==(const Dataset& a, const Dataset& b) { return a.train == b.train && a.test == b.test; }
};

inline constexpr int kMaxCascadeRetries = 10;

inline std::size_t train_count(std::size_t count, double train_ratio) {
  return std::min(count, fraction_count(train_ratio, count));
}

// `count` independent cascades, cascade i seeded by derive_seed(master, i).
// Died-out cascades are re-drawn up to kMaxCascadeRetries times.
inline Dataset generate_dataset(const Hypergraph& g, const PropagationConfig& cfg, std::size_t count,
                                double train_ratio = 0.8, std::size_t threads = 1) {
  cfg.validate();
  if (count < 5) throw ConfigError("dataset count must be at least 5");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("train ratio must lie in (0, 1)");
  std::vector<Snapshot> all(count);
  std::vector<int> retries(count, 0);
  parallel_for(count, threads, [&](std::size_t i) {
    std::uint64_t seed = derive_seed(cfg.seed, i);
    Snapshot snap = simulate_cascade(g, cfg, seed);
    for (int r = 1; snap.meta.died_out && r <= kMaxCascadeRetries; ++r) {
      seed = derive_seed(cfg.seed, i, static_cast<std::uint64_t>(r));
      snap = simulate_cascade(g, cfg, seed);
      retries[i] = r;
    }
    all[i] = std::move(snap);
  });
  Dataset ds;
  const std::size_t ntrain = train_count(count, train_ratio);
  for (std::size_t i = 0; i < count; ++i) {
    ds.redraws += static_cast<std::size_t>(retries[i]);
    ds.died_out_kept += all[i].meta.died_out;
    (i < ntrain ? ds.train : ds.test).push_back(std::move(all[i]));
  }
  return ds;
}

struct SizeLaw {
  std::size_t min_size = 2;
  std::size_t max_size = 5;
};

// m hyperedges with sizes ~ U{min_size..max_size}, members uniform without
// replacement. Connectivity is not guaranteed.
inline Hypergraph random_hypergraph(std::size_t n, std::size_t m, SizeLaw law, std::uint64_t seed) {
  if (law.min_size < 2 || law.min_size > law.max_size) throw ConfigError("invalid hyperedge size law");
  if (law.max_size > n)
    throw ConfigError("hyperedge size " + std::to_string(law.max_size) + " exceeds node count " +
                      std::to_string(n));
  if (m < 1) throw ConfigError("random hypergraph needs at least one hyperedge");
  Rng rng(seed);
  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), NodeId{0});
  std::uniform_int_distribution<std::size_t> size_dist(law.min_size, law.max_size);
  std::vector<Edge> edges;
  edges.reserve(m);
  for (std::size_t e = 0; e < m; ++e) {
    Edge members;
    std::sample(all.begin(), all.end(), std::back_inserter(members), size_dist(rng), rng);
    edges.push_back(std::move(members));
  }
  return Hypergraph(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// Cascade dataset files: JSON array of
// {states: [0/1], timestamps: [real], sources: [ids],
//  meta: {seed, model, delta, step, diedOut, terminalFraction}}
// ---------------------------------------------------------------------------

inline nlohmann::json snapshot_to_json(const Snapshot& s) {
  return {{"states", s.states},
          {"timestamps", s.timestamps},
          {"sources", s.sources},
          {"meta",
           {{"seed", s.meta.seed},
            {"model", to_string(s.meta.model)},
            {"delta", s.meta.delta},
            {"step", s.meta.step},
            {"diedOut", s.meta.died_out},
            {"terminalFraction", s.meta.terminal_fraction}}}};
}

inline Snapshot snapshot_from_json(const nlohmann::json& j) {
  try {
    Snapshot s;
    s.states = j.at("states").get<std::vector<std::uint8_t>>();
    s.timestamps = j.at("timestamps").get<std::vector<double>>();
    s.sources = j.at("sources").get<std::vector<NodeId>>();
    const auto& m = j.at("meta");
    s.meta.seed = m.at("seed").get<std::uint64_t>();
    s.meta.model = parse_diffusion_model(m.at("model").get<std::string>());
    s.meta.delta = m.at("delta").get<double>();
    s.meta.step = m.at("step").get<long>();
    s.meta.died_out = m.at("diedOut").get<bool>();
    s.meta.terminal_fraction = m.value("terminalFraction", 0.0);
    if (s.timestamps.size() != s.states.size()) throw ParseError("timestamps length differs from states");
    for (auto st : s.states)
      if (st > 1) throw ParseError("states must be 0/1");
    for (auto src : s.sources)
      if (src >= s.states.size()) throw ParseError("source id out of range");
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw ParseError(std::string("snapshot JSON: ") + ex.what());
  }
}

inline void save_snapshots(const std::vector<Snapshot>& snaps, const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : snaps) arr.push_back(snapshot_to_json(s));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset file '" + path + "'");
  out << arr.dump() << '\n';
  if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::vector<Snapshot> load_snapshots(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file '" + path + "'");
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(path + ": " + ex.what());
  }
  if (!arr.is_array()) throw ParseError(path + ": dataset file must hold a JSON array");
  std::vector<Snapshot> out;
  for (const auto& j : arr) out.push_back(snapshot_from_json(j));
  return out;
}

}  // namespace hyperdet

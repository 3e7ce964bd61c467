#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperdet/diffusion.hpp"
#include "hyperdet/error.hpp"
#include "hyperdet/faf.hpp"
#include "hyperdet/hypergraph.hpp"
#include "hyperdet/irc.hpp"
#include "hyperdet/lpsi.hpp"
#include "hyperdet/metrics.hpp"
#include "hyperdet/parallel.hpp"
#include "hyperdet/trainer.hpp"

namespace hyperdet {

// ---------------------------------------------------------------------------
// Variants
// ---------------------------------------------------------------------------

enum class Variant { Full, WoH, WoD, WoE, WAL, WAS, WoA };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::WoH: return "woH";
    case Variant::WoD: return "woD";
    case Variant::WoE: return "woE";
    case Variant::WAL: return "wAL";
    case Variant::WAS: return "wAS";
    case Variant::WoA: return "woA";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  for (Variant v : {Variant::Full, Variant::WoH, Variant::WoD, Variant::WoE, Variant::WAL, Variant::WAS, Variant::WoA})
    if (s == to_string(v)) return v;
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected full, woH, woD, woE, wAL, wAS or woA)");
}

inline const std::vector<Variant>& canonical_variants() {
  static const std::vector<Variant> v{Variant::Full, Variant::WoH, Variant::WoD,
                                      Variant::WoE,  Variant::WAL, Variant::WAS};
  return v;
}

inline ModelConfig apply_variant(ModelConfig m, Variant v) {
  switch (v) {
    case Variant::WoD: m.use_dynamic_edges = false; break;
    case Variant::WoE: m.use_autoencoder = false; break;
    case Variant::WAL: m.attention = AttentionMode::LargeDegree; break;
    case Variant::WAS: m.attention = AttentionMode::SmallDegree; break;
    case Variant::WoA: m.attention = AttentionMode::Uniform; break;
    default: break;
  }
  return m;
}

// Structure the model sees: the clique expansion for woH, else g itself.
inline Hypergraph model_graph(const Hypergraph& g, Variant v) {
  return v == Variant::WoH ? clique_expansion_hypergraph(g) : g;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct GraphSpec {
  std::string path;  // empty: generate
  std::size_t nodes = 200;
  std::size_t edges = 120;
  SizeLaw law{2, 5};
};

struct SweepSpec {
  std::size_t seeds = 5;
  std::vector<double> deltas{0.10, 0.15, 0.20, 0.25, 0.30};
  std::vector<double> rates{0.0, 0.05, 0.10, 0.15, 0.20, 0.25};
  std::vector<Variant> variants = canonical_variants();
  std::vector<DiffusionModel> models{DiffusionModel::IC, DiffusionModel::SI, DiffusionModel::SIS, DiffusionModel::SIR};
};

// Seeds not given explicitly are derived from the master seed.
struct SeedSpec {
  std::optional<std::uint64_t> graph, propagation, init, train, mask;
};

struct ExperimentConfig {
  std::uint64_t master_seed = 42;
  GraphSpec graph;
  PropagationConfig propagation;
  std::size_t count = 100;
  double train_ratio = 0.8;
  ModelConfig model;
  TrainConfig train;
  Variant variant = Variant::Full;
  double incomplete_rate = 0.0;
  LpsiConfig lpsi;
  SweepSpec sweep;
  SeedSpec seeds;
  std::size_t threads = 0;  // 0: HYPERDET_THREADS or hardware concurrency
  std::string output = "runs";

  std::size_t worker_threads() const { return threads ? threads : default_threads(); }
  std::uint64_t graph_seed() const { return seeds.graph.value_or(derive_seed(master_seed, 1)); }
  std::uint64_t mask_seed() const { return seeds.mask.value_or(derive_seed(master_seed, 5)); }

  // Copies the derived seeds into the component configs.
  ExperimentConfig resolved() const {
    ExperimentConfig c = *this;
    c.propagation.seed = seeds.propagation.value_or(derive_seed(master_seed, 2));
    c.model.init_seed = seeds.init.value_or(derive_seed(master_seed, 3));
    c.train.seed = seeds.train.value_or(derive_seed(master_seed, 4));
    return c;
  }

  void validate() const {
    if (!graph.path.empty()) {
      if (!std::filesystem::exists(graph.path)) throw ConfigError("graph.path: file '" + graph.path + "' does not exist");
    } else {
      if (graph.nodes < 2) throw ConfigError("graph.nodes must be at least 2");
      if (graph.edges < 1) throw ConfigError("graph.edges must be at least 1");
      if (graph.law.min_size < 2 || graph.law.min_size > graph.law.max_size || graph.law.max_size > graph.nodes)
        throw ConfigError("graph.min_size/max_size must satisfy 2 <= min <= max <= nodes");
    }
    propagation.validate();
    if (count < 5) throw ConfigError("dataset.count must be at least 5");
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ConfigError("dataset.train_ratio must lie in (0, 1)");
    model.validate();
    train.validate();
    if (!(incomplete_rate >= 0.0 && incomplete_rate < 1.0)) throw ConfigError("incomplete_rate must lie in [0, 1)");
    if (!(lpsi.alpha > 0.0 && lpsi.alpha < 1.0)) throw ConfigError("lpsi.alpha must lie in (0, 1)");
    if (sweep.seeds < 1) throw ConfigError("sweep.seeds must be at least 1");
    for (double d : sweep.deltas)
      if (!(d > 0.0 && d <= 1.0)) throw ConfigError("sweep.deltas entries must lie in (0, 1]");
    for (double r : sweep.rates)
      if (!(r >= 0.0 && r < 1.0)) throw ConfigError("sweep.rates entries must lie in [0, 1)");
  }
};

namespace detail {

inline void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown field '" + key + "'");
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
void read_opt(const nlohmann::json& j, const char* key, std::optional<T>& out, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  T v{};
  read(j, key, v, where);
  out = v;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::read;
  ExperimentConfig c;
  detail::check_keys(j, {"seed", "graph", "propagation", "dataset", "model", "train", "variant", "incomplete_rate",
                         "lpsi", "sweep", "seeds", "threads", "output"},
                     "config");
  read(j, "seed", c.master_seed, "config");
  read(j, "incomplete_rate", c.incomplete_rate, "config");
  read(j, "threads", c.threads, "config");
  read(j, "output", c.output, "config");
  if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());

  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    detail::check_keys(g, {"path", "nodes", "edges", "min_size", "max_size"}, "graph");
    read(g, "path", c.graph.path, "graph");
    read(g, "nodes", c.graph.nodes, "graph");
    read(g, "edges", c.graph.edges, "graph");
    read(g, "min_size", c.graph.law.min_size, "graph");
    read(g, "max_size", c.graph.law.max_size, "graph");
  }
  if (j.contains("propagation")) {
    const auto& p = j.at("propagation");
    detail::check_keys(p, {"model", "source_fraction", "max_pairwise_prob", "fixed_pairwise_prob", "group_coeff",
                           "recovery_prob", "delta", "max_steps", "normalize_time"},
                       "propagation");
    if (p.contains("model")) c.propagation.model = parse_diffusion_model(p.at("model").get<std::string>());
    read(p, "source_fraction", c.propagation.source_fraction, "propagation");
    read(p, "max_pairwise_prob", c.propagation.max_pairwise_prob, "propagation");
    detail::read_opt(p, "fixed_pairwise_prob", c.propagation.fixed_pairwise_prob, "propagation");
    read(p, "group_coeff", c.propagation.group_coeff, "propagation");
    read(p, "recovery_prob", c.propagation.recovery_prob, "propagation");
    read(p, "delta", c.propagation.delta, "propagation");
    read(p, "max_steps", c.propagation.max_steps, "propagation");
    read(p, "normalize_time", c.propagation.normalize_time, "propagation");
  }
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::check_keys(d, {"count", "train_ratio"}, "dataset");
    read(d, "count", c.count, "dataset");
    read(d, "train_ratio", c.train_ratio, "dataset");
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    detail::check_keys(m, {"k", "latent", "ae_hidden", "hidden", "head_width", "heads", "slope", "attention"}, "model");
    read(m, "k", c.model.pe_dim, "model");
    read(m, "latent", c.model.latent, "model");
    read(m, "ae_hidden", c.model.ae_hidden, "model");
    read(m, "hidden", c.model.hidden, "model");
    read(m, "head_width", c.model.head_width, "model");
    read(m, "heads", c.model.heads, "model");
    read(m, "slope", c.model.slope, "model");
    if (m.contains("attention")) c.model.attention = parse_attention_mode(m.at("attention").get<std::string>());
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    detail::check_keys(t, {"lr_pretrain", "lr_finetune", "lambda", "pretrain_epochs", "finetune_epochs", "patience",
                           "batch_size", "validation_fraction", "beta1", "beta2", "epsilon"},
                       "train");
    read(t, "lr_pretrain", c.train.lr_pretrain, "train");
    read(t, "lr_finetune", c.train.lr_finetune, "train");
    read(t, "lambda", c.train.lambda, "train");
    read(t, "pretrain_epochs", c.train.pretrain_epochs, "train");
    read(t, "finetune_epochs", c.train.finetune_epochs, "train");
    read(t, "patience", c.train.patience, "train");
    read(t, "batch_size", c.train.batch_size, "train");
    read(t, "validation_fraction", c.train.validation_fraction, "train");
    read(t, "beta1", c.train.beta1, "train");
    read(t, "beta2", c.train.beta2, "train");
    read(t, "epsilon", c.train.epsilon, "train");
  }
  if (j.contains("lpsi")) {
    const auto& l = j.at("lpsi");
    detail::check_keys(l, {"alpha", "tolerance", "max_iterations"}, "lpsi");
    read(l, "alpha", c.lpsi.alpha, "lpsi");
    read(l, "tolerance", c.lpsi.tolerance, "lpsi");
    read(l, "max_iterations", c.lpsi.max_iterations, "lpsi");
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    detail::check_keys(s, {"seeds", "deltas", "rates", "variants", "models"}, "sweep");
    read(s, "seeds", c.sweep.seeds, "sweep");
    read(s, "deltas", c.sweep.deltas, "sweep");
    read(s, "rates", c.sweep.rates, "sweep");
    if (s.contains("variants")) {
      c.sweep.variants.clear();
      for (const auto& v : s.at("variants")) c.sweep.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (s.contains("models")) {
      c.sweep.models.clear();
      for (const auto& v : s.at("models")) c.sweep.models.push_back(parse_diffusion_model(v.get<std::string>()));
    }
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    detail::check_keys(s, {"graph", "propagation", "init", "train", "mask"}, "seeds");
    detail::read_opt(s, "graph", c.seeds.graph, "seeds");
    detail::read_opt(s, "propagation", c.seeds.propagation, "seeds");
    detail::read_opt(s, "init", c.seeds.init, "seeds");
    detail::read_opt(s, "train", c.seeds.train, "seeds");
    detail::read_opt(s, "mask", c.seeds.mask, "seeds");
  }
  return c;
}

// Full resolved configuration, including derived seeds.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  const ExperimentConfig c = cfg.resolved();
  nlohmann::json p = {{"model", to_string(c.propagation.model)},
                      {"source_fraction", c.propagation.source_fraction},
                      {"max_pairwise_prob", c.propagation.max_pairwise_prob},
                      {"group_coeff", c.propagation.group_coeff},
                      {"recovery_prob", c.propagation.recovery_prob},
                      {"delta", c.propagation.delta},
                      {"max_steps", c.propagation.max_steps},
                      {"normalize_time", c.propagation.normalize_time}};
  if (c.propagation.fixed_pairwise_prob) p["fixed_pairwise_prob"] = *c.propagation.fixed_pairwise_prob;
  nlohmann::json model = model_config_to_json(c.model);
  for (const char* k : {"init_seed", "use_autoencoder", "use_dynamic_edges"}) model.erase(k);
  nlohmann::json train = train_config_to_json(c.train);
  train.erase("seed");
  nlohmann::json variants = nlohmann::json::array(), models = nlohmann::json::array();
  for (auto v : c.sweep.variants) variants.push_back(to_string(v));
  for (auto m : c.sweep.models) models.push_back(to_string(m));
  nlohmann::json graph = {{"nodes", c.graph.nodes},
                          {"edges", c.graph.edges},
                          {"min_size", c.graph.law.min_size},
                          {"max_size", c.graph.law.max_size}};
  if (!c.graph.path.empty()) graph = {{"path", c.graph.path}};
  return {{"seed", c.master_seed},
          {"graph", graph},
          {"propagation", p},
          {"dataset", {{"count", c.count}, {"train_ratio", c.train_ratio}}},
          {"model", model},
          {"train", train},
          {"variant", to_string(c.variant)},
          {"incomplete_rate", c.incomplete_rate},
          {"lpsi", {{"alpha", c.lpsi.alpha}, {"tolerance", c.lpsi.tolerance}, {"max_iterations", c.lpsi.max_iterations}}},
          {"sweep",
           {{"seeds", c.sweep.seeds},
            {"deltas", c.sweep.deltas},
            {"rates", c.sweep.rates},
            {"variants", variants},
            {"models", models}}},
          {"seeds",
           {{"graph", c.graph_seed()},
            {"propagation", c.propagation.seed},
            {"init", c.model.init_seed},
            {"train", c.train.seed},
            {"mask", c.mask_seed()}}},
          {"threads", c.threads},
          {"output", c.output}};
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ConfigError(path + ": " + ex.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

inline Hypergraph make_graph(const ExperimentConfig& cfg) {
  if (!cfg.graph.path.empty()) return load_hypergraph(cfg.graph.path);
  return random_hypergraph(cfg.graph.nodes, cfg.graph.edges, cfg.graph.law, cfg.graph_seed());
}

// Features and incidence context for each snapshot. Masking uses one derived
// stream per snapshot; `offset` keeps train and test streams distinct.
inline std::vector<Sample> build_samples(const Hypergraph& g, const std::vector<Snapshot>& snaps,
                                         const ModelConfig& model, double incomplete_rate, std::uint64_t mask_seed,
                                         std::size_t offset, std::size_t threads = 1) {
  std::vector<Sample> out(snaps.size());
  parallel_for(snaps.size(), threads, [&](std::size_t i) {
    FeatureMatrix f = build_features(g, snaps[i], model.pe_dim);
    if (incomplete_rate > 0.0) {
      Rng rng(derive_seed(mask_seed, offset + i));
      f = mask_incomplete(std::move(f), incomplete_rate, rng);
    }
    out[i] = make_sample(g, snaps[i], f.values, model.use_dynamic_edges);
  });
  return out;
}

inline MetricsReport evaluate_model(const std::vector<Sample>& samples, const ModelParams& p, std::size_t threads = 1) {
  MetricsReport r;
  r.rows.resize(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto scores = predict_scores(samples[i].ctx, p, samples[i].features);
    r.rows[i] = score_snapshot(classify(scores), scores, samples[i].sources);
  });
  r.meta["method"] = "hyperdet";
  return r;
}

inline MetricsReport evaluate_lpsi(const Hypergraph& g, const std::vector<Snapshot>& snaps, const LpsiConfig& cfg) {
  MetricsReport r;
  for (const auto& s : snaps) {
    const LpsiResult l = lpsi(g, s.states, cfg);
    r.rows.push_back(score_snapshot(l.sources, l.labels, s.sources));
  }
  r.meta["method"] = "lpsi";
  r.meta["note"] = "label-propagation baseline with reconstructed defaults; directional comparison only";
  return r;
}

struct ArmResult {
  MetricsReport hyperdet;
  MetricsReport lpsi;
  TrainReport train;
};

inline nlohmann::json arm_meta(const ExperimentConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"delta", c.propagation.delta},
          {"incomplete_rate", c.incomplete_rate},
          {"diffusion_model", to_string(c.propagation.model)},
          {"seed", c.master_seed}};
}

// Generate, train and evaluate one configuration end to end.
inline ArmResult run_arm(const Hypergraph& g, const ExperimentConfig& cfg_in, std::size_t threads = 1) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const ModelConfig model = apply_variant(cfg.model, cfg.variant);
  const Hypergraph mg = model_graph(g, cfg.variant);
  const Dataset ds = generate_dataset(g, cfg.propagation, cfg.count, cfg.train_ratio, threads);
  auto train_all = build_samples(mg, ds.train, model, cfg.incomplete_rate, cfg.mask_seed(), 0, threads);
  const auto test = build_samples(mg, ds.test, model, cfg.incomplete_rate, cfg.mask_seed(), ds.train.size(), threads);
  auto [train, val] = split_validation(std::move(train_all), cfg.train.validation_fraction);
  TrainConfig tc = cfg.train;
  tc.threads = threads;
  TrainResult tr = train_model(train, val, model, tc);
  ArmResult r;
  r.train = std::move(tr.report);
  r.hyperdet = evaluate_model(test, tr.params, threads);
  r.lpsi = evaluate_lpsi(g, ds.test, cfg.lpsi);
  r.hyperdet.meta.update(arm_meta(cfg));
  r.lpsi.meta.update(arm_meta(cfg));
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

enum class SweepKind { Early, Incomplete, Ablation, Models };

inline std::string_view to_string(SweepKind k) {
  switch (k) {
    case SweepKind::Early: return "early";
    case SweepKind::Incomplete: return "incomplete";
    case SweepKind::Ablation: return "ablation";
    case SweepKind::Models: return "models";
  }
  return "?";
}

inline SweepKind parse_sweep_kind(std::string_view s) {
  for (SweepKind k : {SweepKind::Early, SweepKind::Incomplete, SweepKind::Ablation, SweepKind::Models})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown sweep kind '" + std::string(s) + "' (expected early, incomplete, ablation or models)");
}

struct SweepArm {
  std::string key;  // value of the swept axis, as text
  ExperimentConfig config;
};

inline std::vector<SweepArm> sweep_arms(const ExperimentConfig& base, SweepKind kind) {
  std::vector<SweepArm> arms;
  auto fmt = [](double x) {
    std::ostringstream os;
    os << x;
    return os.str();
  };
  switch (kind) {
    case SweepKind::Early:
      for (double d : base.sweep.deltas) {
        auto c = base;
        c.propagation.delta = d;
        arms.push_back({fmt(d), c});
      }
      break;
    case SweepKind::Incomplete:
      for (double r : base.sweep.rates) {
        auto c = base;
        c.incomplete_rate = r;
        arms.push_back({fmt(r), c});
      }
      break;
    case SweepKind::Ablation:
      for (Variant v : base.sweep.variants) {
        auto c = base;
        c.variant = v;
        arms.push_back({std::string(to_string(v)), c});
      }
      break;
    case SweepKind::Models:
      for (DiffusionModel m : base.sweep.models) {
        auto c = base;
        c.propagation.model = m;
        arms.push_back({std::string(to_string(m)), c});
      }
      break;
  }
  return arms;
}

// Per-seed configuration: every stochastic component is re-seeded from
// (master, seed index); the graph stays fixed across seeds.
inline ExperimentConfig seed_config(const ExperimentConfig& base, std::size_t seed_index) {
  ExperimentConfig c = base;
  const std::uint64_t s = derive_seed(base.master_seed, 1000 + seed_index);
  c.seeds.graph = base.graph_seed();
  c.seeds.propagation = derive_seed(s, 2);
  c.seeds.init = derive_seed(s, 3);
  c.seeds.train = derive_seed(s, 4);
  c.seeds.mask = derive_seed(s, 5);
  c.master_seed = s;
  return c;
}

struct SweepReport {
  SweepKind kind;
  std::vector<std::string> keys;
  std::vector<MetricsReport> hyperdet;  // one per arm, rows pooled across seeds
  std::vector<MetricsReport> lpsi;
  std::vector<std::vector<double>> seed_f1;  // [arm][seed] HyperDet mean F1
  std::vector<std::vector<double>> lpsi_seed_f1;
};

// Runs every (arm, seed) job on a bounded pool. Each job is single-threaded
// and fully determined by its derived seeds, so scheduling cannot change the
// result.
inline SweepReport run_sweep(const Hypergraph& g, const ExperimentConfig& base, SweepKind kind,
                             std::size_t threads = 1) {
  base.validate();
  const auto arms = sweep_arms(base, kind);
  const std::size_t seeds = base.sweep.seeds;
  std::vector<ArmResult> results(arms.size() * seeds);
  parallel_for(results.size(), threads, [&](std::size_t job) {
    const auto& arm = arms[job / seeds];
    results[job] = run_arm(g, seed_config(arm.config, job % seeds), 1);
  });
  SweepReport rep;
  rep.kind = kind;
  for (std::size_t a = 0; a < arms.size(); ++a) {
    rep.keys.push_back(arms[a].key);
    MetricsReport h, l;
    std::vector<double> hf, lf;
    nlohmann::json seed_rows = nlohmann::json::array();
    for (std::size_t s = 0; s < seeds; ++s) {
      const ArmResult& r = results[a * seeds + s];
      h.rows.insert(h.rows.end(), r.hyperdet.rows.begin(), r.hyperdet.rows.end());
      l.rows.insert(l.rows.end(), r.lpsi.rows.begin(), r.lpsi.rows.end());
      hf.push_back(r.hyperdet.mean("f1"));
      lf.push_back(r.lpsi.mean("f1"));
      seed_rows.push_back({{"seed", r.hyperdet.meta.at("seed")},
                           {"f1", hf.back()},
                           {"acc", r.hyperdet.mean("acc")},
                           {"lpsi_f1", lf.back()},
                           {"best_epoch", r.train.best_epoch}});
    }
    const ExperimentConfig rc = arms[a].config.resolved();
    h.meta = arm_meta(rc);
    h.meta.erase("seed");
    h.meta["seed_count"] = seeds;
    h.meta["per_seed"] = seed_rows;
    l.meta = h.meta;
    h.meta["method"] = "hyperdet";
    l.meta["method"] = "lpsi";
    rep.hyperdet.push_back(std::move(h));
    rep.lpsi.push_back(std::move(l));
    rep.seed_f1.push_back(std::move(hf));
    rep.lpsi_seed_f1.push_back(std::move(lf));
  }
  return rep;
}

}  // namespace hyperdet

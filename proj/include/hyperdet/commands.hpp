#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperdet/experiment.hpp"

// Command implementations behind the hyperdet tool. Each command reads its
// inputs, writes into `out_dir` and never touches its inputs.
namespace hyperdet {

namespace fs = std::filesystem;

// Fresh "<base>/<command>-YYYYmmdd-HHMMSS[-N]" directory unless `forced`
// names one explicitly.
inline std::string output_dir(const std::string& base, const std::string& command, const std::string& forced = "") {
  fs::path dir;
  if (!forced.empty()) {
    dir = forced;
  } else {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream stamp;
    stamp << command << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
    dir = fs::path(base) / stamp.str();
    for (int i = 1; fs::exists(dir); ++i) dir = fs::path(base) / (stamp.str() + "-" + std::to_string(i));
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  return dir.string();
}

inline std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

struct GenResult {
  std::size_t train = 0, test = 0, redraws = 0, died_out_kept = 0;
};

// Writes graph.txt, train.json, test.json and manifest.json.
inline GenResult cmd_gen(const ExperimentConfig& cfg_in, const std::string& out_dir) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const Hypergraph g = make_graph(cfg);
  const Dataset ds = generate_dataset(g, cfg.propagation, cfg.count, cfg.train_ratio, cfg.worker_threads());
  save_hypergraph(g, join(out_dir, "graph.txt"));
  save_snapshots(ds.train, join(out_dir, "train.json"));
  save_snapshots(ds.test, join(out_dir, "test.json"));
  nlohmann::json seeds = nlohmann::json::array();
  for (const auto* part : {&ds.train, &ds.test})
    for (const auto& s : *part) seeds.push_back(s.meta.seed);
  write_json_file({{"command", "gen"},
                   {"config", config_to_json(cfg)},
                   {"graph", {{"nodes", g.num_nodes()}, {"edges", g.num_edges()}}},
                   {"train_count", ds.train.size()},
                   {"test_count", ds.test.size()},
                   {"redraws", ds.redraws},
                   {"died_out_kept", ds.died_out_kept},
                   {"cascade_seeds", seeds}},
                  join(out_dir, "manifest.json"));
  return {ds.train.size(), ds.test.size(), ds.redraws, ds.died_out_kept};
}

// Pretrains (unless the variant has no autoencoder) and fine-tunes on
// <data_dir>/train.json; writes model.ckpt, train_report.json, timing.json.
inline TrainReport cmd_train(const ExperimentConfig& cfg_in, const std::string& data_dir, const std::string& out_dir,
                             std::ostream& log = std::clog) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const Hypergraph g = load_hypergraph(join(data_dir, "graph.txt"));
  const auto snaps = load_snapshots(join(data_dir, "train.json"));
  const ModelConfig model = apply_variant(cfg.model, cfg.variant);
  const Hypergraph mg = model_graph(g, cfg.variant);
  const std::size_t threads = cfg.worker_threads();
  auto samples = build_samples(mg, snaps, model, cfg.incomplete_rate, cfg.mask_seed(), 0, threads);
  auto [train, val] = split_validation(std::move(samples), cfg.train.validation_fraction);
  if (!model.use_autoencoder) log << "variant " << to_string(cfg.variant) << ": skipping autoencoder pretraining\n";
  TrainConfig tc = cfg.train;
  tc.threads = threads;
  TrainResult r = train_model(train, val, model, tc);
  r.report.checkpoint = "model.ckpt";
  save_checkpoint(r.params, join(out_dir, "model.ckpt"), {{"variant", to_string(cfg.variant)}});
  nlohmann::json rep = train_report_to_json(r.report);
  rep["config"] = config_to_json(cfg);
  rep["train_snapshots"] = train.size();
  rep["validation_snapshots"] = val.size();
  write_json_file(rep, join(out_dir, "train_report.json"));
  write_json_file({{"wall_clock_seconds", r.report.wall_clock_seconds}}, join(out_dir, "timing.json"));
  log << "best epoch " << r.report.best_epoch << ", validation F1 " << r.report.best_val_f1 << '\n';
  return r.report;
}

struct EvalResult {
  MetricsReport hyperdet;
  MetricsReport lpsi;
};

// Scores <data_dir>/test.json with the checkpoint and the LPSI baseline.
inline EvalResult cmd_eval(const ExperimentConfig& cfg_in, const std::string& data_dir, const std::string& checkpoint,
                           const std::string& out_dir) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  if (!fs::exists(checkpoint)) throw IoError("checkpoint '" + checkpoint + "' does not exist");
  const Checkpoint ck = load_checkpoint(checkpoint);
  ModelConfig expected = apply_variant(cfg.model, cfg.variant);
  expected.init_seed = ck.params.config.init_seed;
  if (!(expected == ck.params.config))
    throw ShapeError("checkpoint architecture " + model_config_to_json(ck.params.config).dump() +
                     " does not match the configured model " + model_config_to_json(expected).dump());
  const Hypergraph g = load_hypergraph(join(data_dir, "graph.txt"));
  const auto snaps = load_snapshots(join(data_dir, "test.json"));
  const std::size_t threads = cfg.worker_threads();
  const auto samples = build_samples(model_graph(g, cfg.variant), snaps, expected, cfg.incomplete_rate,
                                     cfg.mask_seed(), 1u << 30, threads);
  EvalResult r;
  r.hyperdet = evaluate_model(samples, ck.params, threads);
  r.lpsi = evaluate_lpsi(g, snaps, cfg.lpsi);
  for (auto* rep : {&r.hyperdet, &r.lpsi}) {
    rep->meta.update(arm_meta(cfg));
    rep->meta["config"] = config_to_json(cfg);
    rep->meta["checkpoint"] = fs::path(checkpoint).filename().string();
  }
  save_report(r.hyperdet, join(out_dir, "eval_hyperdet"));
  save_report(r.lpsi, join(out_dir, "eval_lpsi"));
  return r;
}

// Runs one sweep; writes per-arm reports, a long-format series.csv and
// summary.json with seed-level F1.
inline SweepReport cmd_sweep(const ExperimentConfig& cfg_in, SweepKind kind, const std::string& out_dir) {
  const ExperimentConfig cfg = cfg_in.resolved();
  cfg.validate();
  const Hypergraph g = make_graph(cfg);
  const SweepReport rep = run_sweep(g, cfg, kind, cfg.worker_threads());
  nlohmann::json arms = nlohmann::json::array();
  std::vector<std::string> keys;
  std::vector<MetricsReport> all;
  for (std::size_t a = 0; a < rep.keys.size(); ++a) {
    const std::string stem = std::string(to_string(kind)) + "_" + rep.keys[a];
    save_report(rep.hyperdet[a], join(out_dir, stem + "_hyperdet"));
    save_report(rep.lpsi[a], join(out_dir, stem + "_lpsi"));
    arms.push_back({{"key", rep.keys[a]},
                    {"hyperdet_f1", rep.hyperdet[a].mean("f1")},
                    {"hyperdet_acc", rep.hyperdet[a].mean("acc")},
                    {"lpsi_f1", rep.lpsi[a].mean("f1")},
                    {"lpsi_acc", rep.lpsi[a].mean("acc")},
                    {"seed_f1", rep.seed_f1[a]},
                    {"lpsi_seed_f1", rep.lpsi_seed_f1[a]}});
    keys.push_back(rep.keys[a]);
    keys.push_back(rep.keys[a]);
    all.push_back(rep.hyperdet[a]);
    all.push_back(rep.lpsi[a]);
  }
  std::ofstream series(join(out_dir, "series.csv"));
  if (!series) throw IoError("cannot write series.csv");
  const char* axis = kind == SweepKind::Early        ? "delta"
                     : kind == SweepKind::Incomplete ? "rate"
                     : kind == SweepKind::Ablation   ? "variant"
                                                     : "diffusion_model";
  write_series_csv(series, axis, keys, all);
  write_json_file({{"command", "sweep"}, {"kind", to_string(kind)}, {"config", config_to_json(cfg)}, {"arms", arms}},
                  join(out_dir, "summary.json"));
  return rep;
}

// Prints the aggregate table of every report JSON found in `dir`.
inline void cmd_report(const std::string& dir, std::ostream& out) {
  if (!fs::is_directory(dir)) throw IoError("'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json" && e.path().filename() != "manifest.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  out << std::left << std::setw(36) << "report" << std::right;
  for (const char* m : kMetricNames) out << std::setw(18) << m;
  out << '\n' << std::fixed << std::setprecision(4);
  for (const auto& f : files) {
    const nlohmann::json j = read_json_file(f.string());
    if (!j.contains("snapshots")) continue;
    const MetricsReport r = report_from_json(j);
    out << std::left << std::setw(36) << f.stem().string() << std::right;
    for (std::size_t k = 0; k < 5; ++k) {
      const Summary s = r.summary(k);
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4);
      if (std::isfinite(s.mean)) cell << s.mean << " +- " << s.std;
      else cell << "n/a";
      out << std::setw(18) << cell.str();
    }
    out << '\n';
  }
}

}  // namespace hyperdet

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "hyperdet/commands.hpp"

using namespace hyperdet;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_experiment() {
  ExperimentConfig c;
  c.master_seed = 5;
  c.graph.nodes = 30;
  c.graph.edges = 20;
  c.graph.law = {2, 4};
  c.count = 10;
  c.propagation.delta = 0.2;
  c.model.pe_dim = 3;
  c.model.latent = 6;
  c.model.ae_hidden = 8;
  c.model.hidden = 8;
  c.model.head_width = 4;
  c.model.heads = 2;
  c.train.pretrain_epochs = 3;
  c.train.finetune_epochs = 4;
  c.train.patience = 4;
  c.threads = 1;
  c.sweep.seeds = 1;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::path(HYPERDET_TEST_TMP) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Config, ParsesSectionsAndDerivesSeeds) {
  const auto j = nlohmann::json::parse(R"({
    "seed": 9,
    "graph": {"nodes": 50, "edges": 40},
    "propagation": {"model": "SIR", "delta": 0.25, "recovery_prob": 0.2},
    "dataset": {"count": 20},
    "model": {"k": 4, "heads": 2},
    "train": {"finetune_epochs": 7},
    "sweep": {"seeds": 2, "variants": ["full", "woE"]},
    "seeds": {"init": 123}
  })");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.master_seed, 9u);
  EXPECT_EQ(c.graph.nodes, 50u);
  EXPECT_EQ(c.propagation.model, DiffusionModel::SIR);
  EXPECT_EQ(c.model.pe_dim, 4u);
  EXPECT_EQ(c.train.finetune_epochs, 7u);
  EXPECT_EQ(c.sweep.variants.size(), 2u);
  const auto r = c.resolved();
  EXPECT_EQ(r.model.init_seed, 123u);
  EXPECT_EQ(r.propagation.seed, derive_seed(9, 2));
  EXPECT_EQ(r.train.seed, derive_seed(9, 4));
  // the resolved JSON reads back to the same run
  const auto again = config_from_json(config_to_json(c)).resolved();
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, RejectsUnknownFieldsWithLocation) {
  try {
    config_from_json(nlohmann::json::parse(R"({"train": {"learning_rate": 0.1}})"));
    FAIL() << "expected a config error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("train: unknown field 'learning_rate'"), std::string::npos);
  }
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"colour": 1})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"dataset": {"count": "many"}})")), ConfigError);
  EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"variant": "woX"})")), ConfigError);
  auto c = tiny_experiment();
  c.count = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_experiment();
  c.graph.path = "/nonexistent/graph.txt";
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), IoError);
}

TEST(Variants, Wiring) {
  const Hypergraph g(4, {{0, 1, 2}, {2, 3}});
  const std::vector<std::uint8_t> st{1, 0, 1, 0};
  const auto woD = apply_variant(ModelConfig{}, Variant::WoD);
  EXPECT_EQ(augment_incidence(g, st, woD.use_dynamic_edges).num_edges(), g.num_edges());
  EXPECT_EQ(augment_incidence(g, st, true).num_edges(), g.num_edges() + 2);
  const auto woE = init_model(apply_variant(ModelConfig{}, Variant::WoE));
  EXPECT_EQ(woE.tensors[woE.entry.node_transform].value.rows(), 10);  // 2 + k
  EXPECT_EQ(init_model(ModelConfig{}).tensors[init_model(ModelConfig{}).entry.node_transform].value.rows(), 64);
  EXPECT_EQ(model_graph(g, Variant::WoH).num_edges(), 4u);  // {0,1} {0,2} {1,2} {2,3}
  EXPECT_EQ(apply_variant(ModelConfig{}, Variant::WAL).attention, AttentionMode::LargeDegree);
  EXPECT_EQ(apply_variant(ModelConfig{}, Variant::WAS).attention, AttentionMode::SmallDegree);
  EXPECT_EQ(apply_variant(ModelConfig{}, Variant::WoA).attention, AttentionMode::Uniform);
  EXPECT_EQ(canonical_variants().size(), 6u);
  EXPECT_THROW(parse_variant("woZ"), ConfigError);
}

TEST(Sweep, ArmCounts) {
  const auto c = tiny_experiment();
  EXPECT_EQ(sweep_arms(c, SweepKind::Early).size(), 5u);
  EXPECT_EQ(sweep_arms(c, SweepKind::Incomplete).size(), 6u);
  EXPECT_EQ(sweep_arms(c, SweepKind::Models).size(), 4u);
  EXPECT_EQ(sweep_arms(c, SweepKind::Ablation).size(), 6u);
  EXPECT_EQ(sweep_arms(c, SweepKind::Early)[2].key, "0.2");
  EXPECT_THROW(parse_sweep_kind("late"), ConfigError);
}

TEST(Sweep, SingleDeltaIsOneReportWithMetadata) {
  auto c = tiny_experiment();
  c.sweep.deltas = {0.15};
  const auto g = make_graph(c.resolved());
  const auto rep = run_sweep(g, c, SweepKind::Early, 1);
  ASSERT_EQ(rep.hyperdet.size(), 1u);
  EXPECT_EQ(rep.hyperdet[0].meta["delta"], 0.15);
  EXPECT_EQ(rep.hyperdet[0].rows.size(), 2u);  // 10 cascades, 2 test
  const auto again = run_sweep(g, c, SweepKind::Early, 1);
  EXPECT_EQ(report_to_json(again.hyperdet[0]), report_to_json(rep.hyperdet[0]));
}

TEST(Sweep, ZeroRateEqualsBaseline) {
  auto c = tiny_experiment();
  c.sweep.rates = {0.0};
  const auto g = make_graph(c.resolved());
  const auto rep = run_sweep(g, c, SweepKind::Incomplete, 1);
  const auto base = run_arm(g, seed_config(c, 0), 1);
  ASSERT_EQ(rep.hyperdet[0].rows.size(), base.hyperdet.rows.size());
  for (std::size_t i = 0; i < base.hyperdet.rows.size(); ++i) {
    EXPECT_EQ(rep.hyperdet[0].rows[i].f1, base.hyperdet.rows[i].f1);
    EXPECT_EQ(rep.hyperdet[0].rows[i].acc, base.hyperdet.rows[i].acc);
  }
}

TEST(Commands, GenIsByteReproducible) {
  const auto c = tiny_experiment();
  const auto a = fresh_dir("gen_a"), b = fresh_dir("gen_b");
  const auto r = cmd_gen(c, a.string());
  cmd_gen(c, b.string());
  EXPECT_EQ(r.train, 8u);
  EXPECT_EQ(r.test, 2u);
  for (const char* f : {"graph.txt", "train.json", "test.json", "manifest.json"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Commands, TrainThenEvalTwiceIsIdentical) {
  auto c = tiny_experiment();
  c.variant = Variant::WoE;
  const auto data = fresh_dir("pipe_data"), model = fresh_dir("pipe_model");
  cmd_gen(c, data.string());
  std::ostringstream log;
  cmd_train(c, data.string(), model.string(), log);
  EXPECT_NE(log.str().find("variant woE: skipping autoencoder pretraining"), std::string::npos);
  EXPECT_TRUE(fs::exists(model / "timing.json"));
  const auto ev1 = fresh_dir("pipe_eval1"), ev2 = fresh_dir("pipe_eval2");
  const auto ck = (model / "model.ckpt").string();
  cmd_eval(c, data.string(), ck, ev1.string());
  cmd_eval(c, data.string(), ck, ev2.string());
  for (const char* f : {"eval_hyperdet.json", "eval_hyperdet.csv", "eval_lpsi.json", "eval_lpsi.csv"})
    EXPECT_EQ(slurp(ev1 / f), slurp(ev2 / f)) << f;
  EXPECT_THROW(cmd_eval(c, data.string(), (model / "missing.ckpt").string(), ev1.string()), IoError);
  auto full = c;
  full.variant = Variant::Full;
  EXPECT_THROW(cmd_eval(full, data.string(), ck, ev1.string()), ShapeError);
  std::ostringstream table;
  cmd_report(ev1.string(), table);
  EXPECT_NE(table.str().find("eval_lpsi"), std::string::npos);
}

TEST(Commands, OutputDirIsFreshPerCall) {
  const auto base = fresh_dir("outs");
  const auto a = output_dir(base.string(), "gen"), b = output_dir(base.string(), "gen");
  EXPECT_NE(a, b);
  EXPECT_TRUE(fs::is_directory(a));
  EXPECT_EQ(output_dir(base.string(), "gen", (base / "fixed").string()), (base / "fixed").string());
}

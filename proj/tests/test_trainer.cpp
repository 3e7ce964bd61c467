#include <cmath>

#include <gtest/gtest.h>

#include "hyperdet/diffusion.hpp"
#include "hyperdet/trainer.hpp"
#include "oracles.hpp"

using namespace hyperdet;

namespace {

ModelConfig small_model() {
  ModelConfig c;
  c.pe_dim = 4;
  c.latent = 8;
  c.ae_hidden = 16;
  c.hidden = 16;
  c.head_width = 8;
  c.heads = 2;
  return c;
}

std::vector<Sample> samples_for(const Hypergraph& g, const std::vector<Snapshot>& snaps, std::size_t k) {
  std::vector<Sample> out;
  for (const auto& s : snaps) out.push_back(make_sample(g, s, build_features(g, s, k).values, true));
  return out;
}

std::vector<Sample> dataset(std::size_t n, std::size_t count, std::size_t k, std::uint64_t seed) {
  const auto g = random_hypergraph(n, n, {2, 4}, seed);
  PropagationConfig pc;
  pc.seed = seed + 1;
  pc.source_fraction = 0.1;
  pc.delta = 0.3;
  const auto ds = generate_dataset(g, pc, count, 0.8, 1);
  auto all = ds.train;
  all.insert(all.end(), ds.test.begin(), ds.test.end());
  return samples_for(g, all, k);
}

TrainConfig quick_train(std::size_t pre, std::size_t fine) {
  TrainConfig t;
  t.pretrain_epochs = pre;
  t.finetune_epochs = fine;
  t.patience = fine;
  return t;
}

}  // namespace

TEST(Losses, Reconstruction) {
  const Matrix x = Matrix::Random(2, 3);
  EXPECT_EQ(reconstruction_loss(x, x), 0.0);
  EXPECT_DOUBLE_EQ(reconstruction_loss(x, x.array() + 1.0), 6.0);
  EXPECT_THROW(reconstruction_loss(x, Matrix::Zero(3, 2)), ShapeError);
}

TEST(Losses, BalanceCoefficient) {
  EXPECT_NEAR(balance_coefficient(100, 5), 5.0 / 95.0, 1e-15);
  EXPECT_EQ(balance_coefficient(40, 20), 1.0);
  EXPECT_THROW(balance_coefficient(10, 0), Error);
  EXPECT_THROW(balance_coefficient(10, 10), Error);
}

TEST(Losses, BalancedCeMatchesPerNodeLoop) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<std::uint8_t> y(n, 0);
    std::vector<int> yi(n, 0);
    const std::size_t s = 1 + rng() % (n - 1);
    for (std::size_t i = 0; i < s; ++i) y[i] = yi[i] = 1;
    Matrix probs(static_cast<Eigen::Index>(n), 2);
    std::vector<std::pair<double, double>> pp;
    for (std::size_t v = 0; v < n; ++v) {
      const double p = uniform01(rng);
      probs(static_cast<Eigen::Index>(v), 0) = p;
      probs(static_cast<Eigen::Index>(v), 1) = 1.0 - p;
      pp.push_back({p, 1.0 - p});
    }
    const double got = balanced_ce_loss(probs, y), want = oracle::brute_balanced_ce(pp, yi);
    EXPECT_NEAR(got, want, 1e-10 * std::max(1.0, std::abs(want)));
  }
}

TEST(Losses, BalancedCeSpecialCases) {
  const std::vector<std::uint8_t> y{1, 0, 0, 0, 1, 0, 0, 0, 0, 0};
  Matrix uniform = Matrix::Constant(10, 2, 0.5);
  EXPECT_NEAR(balanced_ce_loss(uniform, y), 2.0 * 2.0 * std::log(2.0), 1e-12);
  Matrix perfect(10, 2);
  for (Eigen::Index v = 0; v < 10; ++v) {
    perfect(v, 0) = y[static_cast<std::size_t>(v)];
    perfect(v, 1) = 1 - y[static_cast<std::size_t>(v)];
  }
  EXPECT_LE(balanced_ce_loss(perfect, y), 10 * 1e-11);
  // rho = 1 is a plain CE sum
  const std::vector<std::uint8_t> half{1, 0};
  Matrix p(2, 2);
  p << 0.7, 0.3, 0.4, 0.6;
  EXPECT_NEAR(balanced_ce_loss(p, half), -std::log(0.7) - std::log(0.6), 1e-14);
}

TEST(Losses, TotalLoss) {
  EXPECT_DOUBLE_EQ(total_loss(0.2, 0.3, {Matrix::Ones(2, 2)}, 0.0), 0.5);
  EXPECT_EQ(total_loss(0.0, 0.0, {Matrix::Zero(3, 3)}, 1.0), 0.0);
  Matrix w = Matrix::Constant(1, 1, 0.5);
  const double a = total_loss(0, 0, {w}, 0.1);
  w(0, 0) = -0.6;
  EXPECT_GT(total_loss(0, 0, {w}, 0.1), a);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<NamedTensor> p{{"w", Matrix::Constant(1, 3, 1.0)}};
  Matrix g(1, 3);
  g << 2.0, -0.5, 0.0;
  Adam opt(0.1, 0.9, 0.999, 1e-8);
  opt.step(p, {0}, {g});
  EXPECT_NEAR(p[0].value(0, 0), 0.9, 1e-7);
  EXPECT_NEAR(p[0].value(0, 1), 1.1, 1e-7);
  EXPECT_EQ(p[0].value(0, 2), 1.0);
}

TEST(Split, HoldsOutTail) {
  auto s = dataset(30, 8, 2, 1);
  ASSERT_EQ(s.size(), 8u);
  const auto last = s.back().sources;
  const auto [tr, val] = split_validation(s, 0.125);
  EXPECT_EQ(tr.size(), 7u);
  ASSERT_EQ(val.size(), 1u);
  EXPECT_EQ(val[0].sources, last);
  EXPECT_THROW(split_validation({s[0]}, 0.5), Error);
}

TEST(Pretrain, LossDecreasesAndIsDeterministic) {
  const auto cfg = small_model();
  const auto s = dataset(30, 5, cfg.pe_dim, 2);
  const auto tc = quick_train(30, 1);
  TrainReport r1, r2;
  const auto a = pretrain_autoencoder(s, init_model(cfg), tc, &r1);
  const auto b = pretrain_autoencoder(s, init_model(cfg), tc, &r2);
  ASSERT_EQ(r1.pretrain.size(), 30u);
  EXPECT_LT(r1.pretrain.back().l_ae, r1.pretrain.front().l_ae);
  for (std::size_t i = 0; i < a.tensors.size(); ++i)
    EXPECT_TRUE((a.tensors[i].value.array() == b.tensors[i].value.array()).all());
  // fusion tensors are untouched
  const auto init = init_model(cfg);
  EXPECT_TRUE((a.tensors[a.entry.node_transform].value.array() ==
               init.tensors[init.entry.node_transform].value.array())
                  .all());
}

TEST(Pretrain, OverfitsSingleSnapshot) {
  ModelConfig cfg;  // full-size autoencoder
  const auto s = dataset(20, 5, cfg.pe_dim, 4);
  const std::vector<Sample> one{s[0]};
  const auto p = pretrain_autoencoder(one, init_model(cfg), quick_train(200, 1));
  ad::Tape t;
  const auto m = bind(t, p, false);
  const ad::Var x = t.constant(one[0].features);
  const Matrix xh = decode(one[0].ctx, m, encode(one[0].ctx, m, x)).value();
  const double per_entry = reconstruction_loss(one[0].features, xh) / static_cast<double>(xh.size());
  EXPECT_LT(per_entry, 0.05);
}

TEST(Finetune, DeterministicReport) {
  const auto cfg = small_model();
  const auto s = dataset(30, 8, cfg.pe_dim, 5);
  const auto [tr, val] = split_validation(s, 0.25);
  const auto tc = quick_train(5, 8);
  const auto a = train_model(tr, val, cfg, tc), b = train_model(tr, val, cfg, tc);
  EXPECT_EQ(train_report_to_json(a.report), train_report_to_json(b.report));
  for (std::size_t i = 0; i < a.params.tensors.size(); ++i)
    EXPECT_TRUE((a.params.tensors[i].value.array() == b.params.tensors[i].value.array()).all());
  auto threaded = tc;
  threaded.threads = 3;
  EXPECT_EQ(train_report_to_json(train_model(tr, val, cfg, threaded).report), train_report_to_json(a.report));
}

TEST(Finetune, EarlyStoppingKeepsBestEpoch) {
  const auto cfg = small_model();
  const auto s = dataset(30, 10, cfg.pe_dim, 6);
  const auto [tr, val] = split_validation(s, 0.3);
  auto tc = quick_train(5, 40);
  tc.patience = 5;
  tc.lr_finetune = 0.02;
  const auto r = train_model(tr, val, cfg, tc);
  double best_seen = 0.0;
  for (const auto& e : r.report.finetune) best_seen = std::max(best_seen, *e.val_f1);
  EXPECT_EQ(r.report.best_val_f1, best_seen);
  EXPECT_NEAR(evaluate_mean(val, r.params).f1, r.report.best_val_f1, 1e-12);
  // the earliest epoch achieving the best F1 is the one kept
  for (std::size_t i = 0; i < r.report.best_epoch; ++i) EXPECT_LT(*r.report.finetune[i].val_f1, best_seen);
  if (r.report.stopped_early) { EXPECT_EQ(r.report.finetune.size(), r.report.best_epoch + 1 + tc.patience); }
  if (r.report.best_epoch > 0) {
    EXPECT_LT(r.report.finetune[r.report.best_epoch].total, r.report.finetune.front().total);
  }
}

TEST(Finetune, ShuffledLabelsGiveChanceLevelF1) {
  const auto cfg = small_model();
  auto s = dataset(40, 16, cfg.pe_dim, 7);
  Rng rng(99);
  double prevalence = 0.0;
  std::vector<Sample> train(s.begin(), s.begin() + 12), val(s.begin() + 12, s.end());
  for (auto& smp : train) {
    // move every source label to a uniformly random node
    std::vector<NodeId> nodes(smp.labels.size());
    std::iota(nodes.begin(), nodes.end(), NodeId{0});
    std::shuffle(nodes.begin(), nodes.end(), rng);
    std::fill(smp.labels.begin(), smp.labels.end(), 0);
    smp.sources.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(smp.sources.size()));
    for (NodeId v : smp.sources) smp.labels[v] = 1;
  }
  for (const auto& smp : val) prevalence += static_cast<double>(smp.sources.size()) / smp.labels.size();
  prevalence /= static_cast<double>(val.size());
  auto tc = quick_train(5, 20);
  const auto r = train_model(train, val, cfg, tc);
  EXPECT_NEAR(evaluate_mean(val, r.params).f1, prevalence, 0.1);
}

TEST(TrainConfig, Validation) {
  TrainConfig t;
  t.lr_finetune = 0.0;
  EXPECT_THROW(t.validate(), ConfigError);
  t = TrainConfig{};
  t.validation_fraction = 1.0;
  EXPECT_THROW(t.validate(), ConfigError);
}

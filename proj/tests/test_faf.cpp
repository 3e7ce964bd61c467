#include <filesystem>
#include <fstream>
#include <numeric>

#include <gtest/gtest.h>

#include "hyperdet/diffusion.hpp"
#include "hyperdet/faf.hpp"
#include "hyperdet/trainer.hpp"

using namespace hyperdet;

namespace {

Matrix scalar(double x) {
  Matrix m(1, 1);
  m << x;
  return m;
}

Matrix col(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

double lrelu(double x, double s = 0.2) { return x > 0 ? x : s * x; }

ModelConfig tiny_config() {
  ModelConfig c;
  c.pe_dim = 2;
  c.latent = 4;
  c.ae_hidden = 5;
  c.hidden = 6;
  c.head_width = 3;
  c.heads = 2;
  return c;
}

struct Instance {
  Hypergraph g;
  Snapshot snap;
  Sample sample;
};

Instance small_instance(const ModelConfig& cfg, bool dynamic = true) {
  Hypergraph g(6, {{0, 1, 2}, {2, 3}, {3, 4, 5}});
  Snapshot s;
  s.states = {1, 1, 1, 0, 0, 0};
  s.timestamps = {0.0, 0.5, 1.0, -1, -1, -1};
  s.sources = {0};
  const Matrix f = build_features(g, s, cfg.pe_dim).values;
  Sample smp = make_sample(g, s, f, dynamic);
  return {std::move(g), std::move(s), std::move(smp)};
}

Matrix random_features(std::size_t n, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(w));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * uniform01(rng) - 1.0;
  return m;
}

}  // namespace

TEST(AttentionLogit, TrivialCases) {
  const Matrix x = scalar(1.0), th = scalar(1.0), w = scalar(1.0);
  EXPECT_EQ(attention_logit(x, th, w, col({0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(attention_logit(x, th, w, col({1, 1})), 2.0);
  EXPECT_DOUBLE_EQ(attention_logit(scalar(-1.0), th, w, col({1, 0})), -0.2);
}

TEST(Attention, SingletonAndIdenticalMembers) {
  ad::Tape t;
  const ad::Var one = ad::segment_softmax(t.constant(scalar(4.2)), {{0}, 1});
  EXPECT_EQ(one.scalar(), 1.0);
  const ad::Var two = ad::segment_softmax(t.constant(col({0.3, 0.3})), {{0, 0}, 1});
  EXPECT_DOUBLE_EQ(two.value()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(two.value()(1, 0), 0.5);
}

TEST(Context, AttentionSegmentsSkipEmptyColumns) {
  const Hypergraph g(3, {{0, 1}});
  // all spreaders: the ignorant column is empty
  const auto ctx = make_context(augment_incidence(g, std::vector<std::uint8_t>{1, 1, 1}));
  EXPECT_EQ(ctx.num_edges, 3u);
  EXPECT_EQ(ctx.by_edge_nonempty.count, 2u);
  EXPECT_EQ(ctx.by_node_nonisolated.count, 3u);
  const auto woD = make_context(augment_incidence(g, std::vector<std::uint8_t>{1, 1, 1}, false));
  EXPECT_EQ(woD.by_node_nonisolated.count, 2u);  // node 2 has no edge
}

TEST(HConv, AttentionIsNormalized) {
  const auto cfg = tiny_config();
  const auto p = init_model(cfg);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto g = random_hypergraph(30, 25, {2, 5}, seed);
    const auto snap = simulate_cascade(g, PropagationConfig{}, seed);
    const auto ctx = make_context(augment_incidence(g, snap));
    ad::Tape t;
    const auto m = bind(t, p, false);
    const ad::Var x = t.constant(random_features(30, cfg.feature_width(), seed));
    const auto out = hconv_att(ctx, x, initial_edge_attributes(ctx, x), m.layer(p.encoder[0]), cfg.attention, 0.2);
    std::vector<double> by_edge(ctx.num_edges, 0.0), by_node(ctx.num_nodes, 0.0);
    for (std::size_t q = 0; q < ctx.num_pairs(); ++q) {
      by_edge[ctx.pair_edge[q]] += out.alpha_v2e.value()(static_cast<Eigen::Index>(q), 0);
      by_node[ctx.pair_node[q]] += out.alpha_e2v.value()(static_cast<Eigen::Index>(q), 0);
    }
    for (std::size_t e = 0; e < ctx.num_edges; ++e)
      if (ctx.edge_degree[e] > 0) { EXPECT_NEAR(by_edge[e], 1.0, 1e-12); }
    for (std::size_t v = 0; v < ctx.num_nodes; ++v)
      if (ctx.node_degree[v] > 0) { EXPECT_NEAR(by_node[v], 1.0, 1e-12); }
  }
}

TEST(HConv, FixedModesAreNormalized) {
  const auto g = random_hypergraph(20, 15, {2, 5}, 3);
  const auto snap = simulate_cascade(g, PropagationConfig{}, 3);
  const auto ctx = make_context(augment_incidence(g, snap));
  for (auto mode : {AttentionMode::Uniform, AttentionMode::LargeDegree, AttentionMode::SmallDegree}) {
    for (bool within_edge : {true, false}) {
      const auto c = detail::fixed_coefficients(ctx, mode, within_edge);
      const auto& seg = within_edge ? ctx.by_edge : ctx.by_node;
      std::vector<double> sum(seg.count, 0.0);
      for (std::size_t q = 0; q < c.size(); ++q) sum[seg.ids[q]] += c[q];
      for (double s : sum)
        if (s != 0.0) { EXPECT_NEAR(s, 1.0, 1e-12); }
    }
  }
  // large-degree weights follow node degree inside an edge
  const Hypergraph h(3, {{0, 1}, {1, 2}});
  const auto hc = make_context(augment_incidence(h, std::vector<std::uint8_t>{1, 0, 0}, false));
  const auto large = detail::fixed_coefficients(hc, AttentionMode::LargeDegree, true);
  EXPECT_DOUBLE_EQ(large[0], 1.0 / 3.0);  // pair (0, e0): degree 1 of 1 + 2
  EXPECT_DOUBLE_EQ(large[1], 2.0 / 3.0);
  const auto small = detail::fixed_coefficients(hc, AttentionMode::SmallDegree, true);
  EXPECT_DOUBLE_EQ(small[0], 2.0 / 3.0);
}

TEST(HConv, ZeroInputGivesZeroOutput) {
  const auto cfg = tiny_config();
  const auto p = init_model(cfg);
  const auto inst = small_instance(cfg);
  ad::Tape t;
  const auto m = bind(t, p, false);
  const ad::Var x = t.constant(Matrix::Zero(6, static_cast<Eigen::Index>(cfg.feature_width())));
  const auto out = hconv_att(inst.sample.ctx, x, initial_edge_attributes(inst.sample.ctx, x), m.layer(p.encoder[0]),
                             cfg.attention, 0.2);
  EXPECT_TRUE(out.nodes.value().isZero(0.0));
  EXPECT_TRUE(out.edges.value().isZero(0.0));
}

TEST(HConv, HandTracedTwoNodeEdge) {
  const Hypergraph g(2, {{0, 1}});
  const auto ctx = make_context(augment_incidence(g, std::vector<std::uint8_t>{1, 0}, false));
  const double w = 0.7, u = -1.3, a1 = 0.4, a2 = -0.9, b1 = 0.25, b2 = 0.6, x0 = 1.0, x1 = -2.0;
  ad::Tape t;
  BoundLayer l{t.constant(scalar(w)), t.constant(scalar(u)), t.constant(col({a1, a2})), t.constant(col({b1, b2}))};
  const ad::Var x = t.constant(col({x0, x1}));
  const auto out = hconv_att(ctx, x, initial_edge_attributes(ctx, x), l, AttentionMode::Learned, 0.2);

  // independent scalar trace
  const double theta0 = 0.5 * (x0 + x1);
  const double l0 = a1 * lrelu(x0 * w) + a2 * lrelu(theta0 * w);
  const double l1 = a1 * lrelu(x1 * w) + a2 * lrelu(theta0 * w);
  const double al0 = std::exp(l0) / (std::exp(l0) + std::exp(l1)), al1 = 1.0 - al0;
  const double theta1 = lrelu(al0 * x0 * w + al1 * x1 * w);
  const double node = lrelu(1.0 * 1.0 * theta1 * u);  // single incident edge, weight 1
  EXPECT_NEAR(out.alpha_v2e.value()(0, 0), al0, 1e-14);
  EXPECT_NEAR(out.edges.scalar(), theta1, 1e-14);
  EXPECT_NEAR(out.nodes.value()(0, 0), node, 1e-14);
  EXPECT_NEAR(out.nodes.value()(1, 0), node, 1e-14);
  EXPECT_EQ(out.alpha_e2v.value()(0, 0), 1.0);
}

TEST(HConv, EdgeWeightScalesNodeOutput) {
  const auto cfg = tiny_config();
  const auto p = init_model(cfg);
  auto inst = small_instance(cfg);
  auto run = [&](const GraphContext& ctx) {
    ad::Tape t;
    const auto m = bind(t, p, false);
    const ad::Var x = t.constant(inst.sample.features);
    return Matrix(
        hconv_att(ctx, x, initial_edge_attributes(ctx, x), m.layer(p.encoder[0]), AttentionMode::Uniform, 0.2)
            .nodes.value());
  };
  const Matrix base = run(inst.sample.ctx);
  GraphContext scaled = inst.sample.ctx;
  for (auto& w : scaled.pair_weight) w *= 2.5;
  EXPECT_LE((run(scaled) - 2.5 * base).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(HConv, ShapeMismatchThrows) {
  const auto cfg = tiny_config();
  const auto p = init_model(cfg);
  const auto inst = small_instance(cfg);
  ad::Tape t;
  const auto m = bind(t, p, false);
  const ad::Var x = t.constant(Matrix::Zero(6, 3));
  EXPECT_THROW(hconv_att(inst.sample.ctx, x, initial_edge_attributes(inst.sample.ctx, x), m.layer(p.encoder[0]),
                         cfg.attention, 0.2),
               ShapeError);
  EXPECT_THROW(encode(inst.sample.ctx, m, x), ShapeError);
}

TEST(Model, DefaultShapes) {
  ModelConfig cfg;
  const auto p = init_model(cfg);
  const auto inst = small_instance(cfg);
  ad::Tape t;
  const auto m = bind(t, p, false);
  const auto r = forward(inst.sample.ctx, m, t.constant(inst.sample.features));
  EXPECT_EQ(r.latent->rows(), 6);
  EXPECT_EQ(r.latent->cols(), 64);
  EXPECT_EQ(r.reconstruction->cols(), 10);
  EXPECT_EQ(r.fusion.entry.cols(), 500);
  EXPECT_EQ(r.fusion.multi_head.cols(), 192);
  EXPECT_EQ(r.fusion.averaged.cols(), 64);
  for (Eigen::Index v = 0; v < 6; ++v) {
    EXPECT_NEAR(r.fusion.probs.value().row(v).sum(), 1.0, 1e-12);
    EXPECT_GT(r.fusion.probs.value()(v, 0), 0.0);
  }
  EXPECT_EQ(p.tensors.front().name, "enc0.W");
  EXPECT_EQ(p.tensors.back().name, "proj.b");
}

TEST(Model, WithoutAutoencoderFusionReadsFeatures) {
  auto cfg = tiny_config();
  cfg.use_autoencoder = false;
  const auto p = init_model(cfg);
  EXPECT_TRUE(p.autoencoder_slots().empty());
  EXPECT_EQ(p.tensors[p.entry.node_transform].value.rows(), static_cast<Eigen::Index>(cfg.feature_width()));
  const auto inst = small_instance(cfg);
  ad::Tape t;
  const auto r = forward(inst.sample.ctx, bind(t, p, false), t.constant(inst.sample.features));
  EXPECT_FALSE(r.latent.has_value());
}

TEST(Model, EqualLogitsGiveOneHalf) {
  ad::Tape t;
  const ad::Var p = ad::row_softmax(t.constant(Matrix::Zero(1, 2)));
  EXPECT_EQ(p.value()(0, 0), 0.5);
  EXPECT_TRUE(classify(p.value()).empty());
  EXPECT_EQ(classify(std::vector<double>{0.5, 0.5000001, 0.9, 0.1}), (std::vector<NodeId>{1, 2}));
}

TEST(Model, ForwardIsDeterministic) {
  const auto cfg = tiny_config();
  const auto inst = small_instance(cfg);
  const auto a = predict_scores(inst.sample.ctx, init_model(cfg), inst.sample.features);
  const auto b = predict_scores(inst.sample.ctx, init_model(cfg), inst.sample.features);
  EXPECT_EQ(a, b);
  auto other = cfg;
  other.init_seed = 8;
  EXPECT_NE(a, predict_scores(inst.sample.ctx, init_model(other), inst.sample.features));
}

TEST(Model, PermutationEquivariance) {
  const auto cfg = tiny_config();
  const auto p = init_model(cfg);
  const auto g = random_hypergraph(15, 12, {2, 4}, 5);
  const auto snap = simulate_cascade(g, PropagationConfig{}, 5);
  const Matrix f = random_features(15, cfg.feature_width(), 9);
  const auto base = predict_scores(make_context(augment_incidence(g, snap)), p, f);

  std::vector<NodeId> perm(15);
  std::iota(perm.begin(), perm.end(), NodeId{0});
  Rng rng(11);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    Edge pe;
    for (NodeId v : e) pe.push_back(perm[v]);
    edges.push_back(pe);
  }
  const Hypergraph pg(15, edges);
  std::vector<std::uint8_t> st(15);
  Matrix pf(f.rows(), f.cols());
  for (NodeId v = 0; v < 15; ++v) {
    st[perm[v]] = snap.states[v];
    pf.row(static_cast<Eigen::Index>(perm[v])) = f.row(static_cast<Eigen::Index>(v));
  }
  const auto moved = predict_scores(make_context(augment_incidence(pg, st)), p, pf);
  for (NodeId v = 0; v < 15; ++v) EXPECT_NEAR(moved[perm[v]], base[v], 1e-10);
}

TEST(Model, TotalLossGradientMatchesFiniteDifferences) {
  const auto cfg = tiny_config();
  const auto p = init_model(cfg);
  const auto inst = small_instance(cfg);
  std::vector<Matrix> point;
  for (const auto& t : p.tensors) point.push_back(t.value);
  const auto rep = ad::grad_check(
      [&](ad::Tape&, const std::vector<ad::Var>& vars) {
        BoundModel m;
        m.params = &p;
        m.vars = vars;
        return full_loss(inst.sample, m, 5e-4).total;
      },
      point, 1e-6, 1e-3, 1e-4);
  EXPECT_TRUE(rep.passed) << "worst rel " << rep.max_rel_error << " in " << p.tensors[rep.worst_input].name;
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = std::filesystem::path(HYPERDET_TEST_TMP);
  std::filesystem::create_directories(dir);
  auto cfg = tiny_config();
  cfg.attention = AttentionMode::SmallDegree;
  const auto p = init_model(cfg);
  const auto path = (dir / "model.ckpt").string();
  save_checkpoint(p, path, {{"note", "x"}});
  const auto ck = load_checkpoint(path);
  EXPECT_EQ(ck.params.config, cfg);
  ASSERT_EQ(ck.params.tensors.size(), p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i)
    EXPECT_TRUE((ck.params.tensors[i].value.array() == p.tensors[i].value.array()).all());
  EXPECT_EQ(ck.header["meta"]["note"], "x");
  EXPECT_EQ(ck.header["count"], p.count());
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const auto dir = std::filesystem::path(HYPERDET_TEST_TMP);
  std::filesystem::create_directories(dir);
  const auto p = init_model(tiny_config());
  const auto path = (dir / "bad.ckpt").string();
  save_checkpoint(p, path);
  {
    std::ofstream out(path, std::ios::app | std::ios::binary);
    out << 'x';
  }
  EXPECT_THROW(load_checkpoint(path), ParseError);
  save_checkpoint(p, path);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  EXPECT_THROW(load_checkpoint(path), ParseError);
  EXPECT_THROW(load_checkpoint((dir / "nope.ckpt").string()), IoError);
}

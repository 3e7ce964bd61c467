#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperdet/autodiff.hpp"
#include "hyperdet/error.hpp"
#include "hyperdet/irc.hpp"
#include "hyperdet/matrix.hpp"
#include "hyperdet/rng.hpp"

// Attention hypergraph convolution, the autoencoder and the multi-head
// fusion classifier.
//
// Conventions: feature blocks are row-per-node (n x width). Node and edge
// transforms are stored input-major (in x out) so a layer computes X * W.
namespace hyperdet {

enum class AttentionMode {
  Learned,      // softmax over a^T LeakyReLU([x W || theta W])
  Uniform,      // 1 / segment size
  LargeDegree,  // proportional to degree of the attended element
  SmallDegree,  // proportional to inverse degree
};

inline std::string_view to_string(AttentionMode m) {
  switch (m) {
    case AttentionMode::Learned: return "learned";
    case AttentionMode::Uniform: return "uniform";
    case AttentionMode::LargeDegree: return "large_degree";
    case AttentionMode::SmallDegree: return "small_degree";
  }
  return "?";
}

inline AttentionMode parse_attention_mode(std::string_view s) {
  if (s == "learned") return AttentionMode::Learned;
  if (s == "uniform") return AttentionMode::Uniform;
  if (s == "large_degree") return AttentionMode::LargeDegree;
  if (s == "small_degree") return AttentionMode::SmallDegree;
  throw ConfigError("unknown attention mode '" + std::string(s) + "'");
}

// Incidence pairs of H' in edge-major order plus the segmentations both
// convolution stages need. Built once per snapshot.
struct GraphContext {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  std::vector<std::size_t> pair_node;
  std::vector<std::size_t> pair_edge;
  std::vector<double> pair_weight;       // Omega_ee of the pair's edge
  std::vector<double> pair_member_mean;  // 1 / |e|, for the initial edge attributes
  ad::Segments by_edge;                  // all m' edges, some possibly empty
  ad::Segments by_node;                  // all n nodes, some possibly isolated
  ad::Segments by_edge_nonempty;         // softmax segments over non-empty edges
  ad::Segments by_node_nonisolated;      // softmax segments over nodes with degree >= 1
  std::vector<double> node_degree;       // degree in H' (unweighted)
  std::vector<double> edge_degree;       // |e|

  std::size_t num_pairs() const { return pair_node.size(); }
};

inline GraphContext make_context(const AugmentedIncidence& h) {
  GraphContext c;
  c.num_nodes = h.num_nodes;
  c.num_edges = h.num_edges();
  c.node_degree.assign(c.num_nodes, 0.0);
  c.edge_degree.assign(c.num_edges, 0.0);
  for (EdgeId e = 0; e < h.num_edges(); ++e) {
    c.edge_degree[e] = static_cast<double>(h.edge_nodes[e].size());
    for (NodeId v : h.edge_nodes[e]) {
      c.pair_node.push_back(v);
      c.pair_edge.push_back(e);
      c.pair_weight.push_back(h.weights[e]);
      c.pair_member_mean.push_back(1.0 / static_cast<double>(h.edge_nodes[e].size()));
      c.node_degree[v] += 1.0;
    }
  }
  c.by_edge = {c.pair_edge, c.num_edges};
  c.by_node = {c.pair_node, c.num_nodes};
  auto compact = [](const std::vector<std::size_t>& ids, std::size_t count) {
    std::vector<std::size_t> remap(count, 0);
    std::vector<bool> used(count, false);
    for (auto i : ids) used[i] = true;
    std::size_t next = 0;
    for (std::size_t i = 0; i < count; ++i)
      if (used[i]) remap[i] = next++;
    ad::Segments s{{}, next};
    s.ids.reserve(ids.size());
    for (auto i : ids) s.ids.push_back(remap[i]);
    return s;
  };
  c.by_edge_nonempty = compact(c.pair_edge, c.num_edges);
  c.by_node_nonisolated = compact(c.pair_node, c.num_nodes);
  return c;
}

// Parameters of one HConv_att layer, as indices into ModelParams::tensors.
struct LayerSlots {
  std::size_t in = 0, out = 0;
  std::size_t node_transform = 0;  // W   (in x out)
  std::size_t edge_transform = 0;  // W'  (out x out)
  std::size_t attn_v2e = 0;        // a   (2 out x 1)
  std::size_t attn_e2v = 0;        // a'  (2 out x 1)
};

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct ModelConfig {
  std::size_t pe_dim = 8;  // k; features are 2 + k wide
  std::size_t latent = 64;
  std::size_t ae_hidden = 128;
  std::size_t hidden = 500;
  std::size_t head_width = 64;
  std::size_t heads = 3;
  double slope = 0.2;
  std::uint64_t init_seed = 7;
  AttentionMode attention = AttentionMode::Learned;
  bool use_autoencoder = true;
  bool use_dynamic_edges = true;

  std::size_t feature_width() const { return 2 + pe_dim; }

  void validate() const {
    if (pe_dim < 1) throw ConfigError("model.k must be at least 1");
    if (latent < 1 || ae_hidden < 1 || hidden < 1 || head_width < 1)
      throw ConfigError("model widths must be positive");
    if (heads < 1 || heads > 8) throw ConfigError("model.heads must lie in [1, 8]");
    if (!(slope >= 0.0 && slope < 1.0)) throw ConfigError("model.slope must lie in [0, 1)");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"k", c.pe_dim},
          {"latent", c.latent},
          {"ae_hidden", c.ae_hidden},
          {"hidden", c.hidden},
          {"head_width", c.head_width},
          {"heads", c.heads},
          {"slope", c.slope},
          {"init_seed", c.init_seed},
          {"attention", to_string(c.attention)},
          {"use_autoencoder", c.use_autoencoder},
          {"use_dynamic_edges", c.use_dynamic_edges}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.pe_dim = j.value("k", c.pe_dim);
  c.latent = j.value("latent", c.latent);
  c.ae_hidden = j.value("ae_hidden", c.ae_hidden);
  c.hidden = j.value("hidden", c.hidden);
  c.head_width = j.value("head_width", c.head_width);
  c.heads = j.value("heads", c.heads);
  c.slope = j.value("slope", c.slope);
  c.init_seed = j.value("init_seed", c.init_seed);
  c.attention = parse_attention_mode(j.value("attention", std::string(to_string(c.attention))));
  c.use_autoencoder = j.value("use_autoencoder", c.use_autoencoder);
  c.use_dynamic_edges = j.value("use_dynamic_edges", c.use_dynamic_edges);
  c.validate();
  return c;
}

// All trainable tensors in declared order plus the layer wiring.
struct ModelParams {
  ModelConfig config;
  std::vector<NamedTensor> tensors;
  std::vector<LayerSlots> encoder, decoder;
  LayerSlots entry;
  std::vector<LayerSlots> heads, finals;
  std::size_t projection = 0;  // head_width x 2
  std::size_t bias = 0;        // 1 x 2

  std::size_t count() const {
    std::size_t total = 0;
    for (const auto& t : tensors) total += static_cast<std::size_t>(t.value.size());
    return total;
  }
  // Indices of the autoencoder tensors (empty without an autoencoder).
  std::vector<std::size_t> autoencoder_slots() const {
    std::vector<std::size_t> out;
    for (const auto* group : {&encoder, &decoder})
      for (const auto& l : *group) out.insert(out.end(), {l.node_transform, l.edge_transform, l.attn_v2e, l.attn_e2v});
    return out;
  }
};

namespace detail {

inline Matrix glorot(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

inline Matrix uniform_block(Eigen::Index rows, Eigen::Index cols, double limit, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

inline LayerSlots add_layer(ModelParams& p, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  LayerSlots l;
  l.in = in;
  l.out = out;
  const auto i = static_cast<Eigen::Index>(in), o = static_cast<Eigen::Index>(out);
  l.node_transform = p.tensors.size();
  p.tensors.push_back({name + ".W", glorot(i, o, rng)});
  l.edge_transform = p.tensors.size();
  p.tensors.push_back({name + ".W_edge", glorot(o, o, rng)});
  l.attn_v2e = p.tensors.size();
  p.tensors.push_back({name + ".a_v2e", uniform_block(2 * o, 1, 0.1, rng)});
  l.attn_e2v = p.tensors.size();
  p.tensors.push_back({name + ".a_e2v", uniform_block(2 * o, 1, 0.1, rng)});
  return l;
}

}  // namespace detail

// Builds the architecture for `cfg` with glorot-uniform transforms,
// attention vectors in +-0.1 and a zero output bias.
inline ModelParams init_model(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  Rng rng(cfg.init_seed);
  const std::size_t fw = cfg.feature_width();
  if (cfg.use_autoencoder) {
    p.encoder.push_back(detail::add_layer(p, "enc0", fw, cfg.ae_hidden, rng));
    p.encoder.push_back(detail::add_layer(p, "enc1", cfg.ae_hidden, cfg.latent, rng));
    p.decoder.push_back(detail::add_layer(p, "dec0", cfg.latent, cfg.ae_hidden, rng));
    p.decoder.push_back(detail::add_layer(p, "dec1", cfg.ae_hidden, fw, rng));
  }
  const std::size_t fusion_in = cfg.use_autoencoder ? cfg.latent : fw;
  p.entry = detail::add_layer(p, "entry", fusion_in, cfg.hidden, rng);
  for (std::size_t k = 0; k < cfg.heads; ++k)
    p.heads.push_back(detail::add_layer(p, "head" + std::to_string(k), cfg.hidden, cfg.head_width, rng));
  for (std::size_t k = 0; k < cfg.heads; ++k)
    p.finals.push_back(
        detail::add_layer(p, "final" + std::to_string(k), cfg.heads * cfg.head_width, cfg.head_width, rng));
  p.projection = p.tensors.size();
  p.tensors.push_back({"proj.W", detail::glorot(static_cast<Eigen::Index>(cfg.head_width), 2, rng)});
  p.bias = p.tensors.size();
  p.tensors.push_back({"proj.b", Matrix::Zero(1, 2)});
  return p;
}

// ---------------------------------------------------------------------------
// Layer math
// ---------------------------------------------------------------------------

// a^T LeakyReLU([x W || theta W]) for a single (node, edge) pair; x and theta
// are row vectors of width `in`.
inline double attention_logit(const Matrix& x, const Matrix& theta, const Matrix& w, const Matrix& a,
                              double slope = 0.2) {
  Matrix cat(1, 2 * w.cols());
  cat << x * w, theta * w;
  const Matrix act = cat.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
  return (act * a)(0, 0);
}

// Tape handles for one layer's parameters.
struct BoundLayer {
  ad::Var node_transform, edge_transform, attn_v2e, attn_e2v;
};

struct StageOutput {
  ad::Var features;   // theta' (m' x out) or X' (n x out)
  ad::Var attention;  // P x 1 coefficients in pair order
};

namespace detail {

inline std::vector<double> fixed_coefficients(const GraphContext& ctx, AttentionMode mode, bool within_edge) {
  const std::size_t P = ctx.num_pairs();
  std::vector<double> raw(P, 1.0);
  for (std::size_t p = 0; p < P; ++p) {
    // within an edge we attend over member nodes; within a node over its edges
    const double deg = within_edge ? ctx.node_degree[ctx.pair_node[p]] : ctx.edge_degree[ctx.pair_edge[p]];
    if (mode == AttentionMode::LargeDegree) raw[p] = deg;
    else if (mode == AttentionMode::SmallDegree) raw[p] = 1.0 / deg;
  }
  const ad::Segments& seg = within_edge ? ctx.by_edge : ctx.by_node;
  std::vector<double> total(seg.count, 0.0);
  for (std::size_t p = 0; p < P; ++p) total[seg.ids[p]] += raw[p];
  for (std::size_t p = 0; p < P; ++p) raw[p] /= total[seg.ids[p]];
  return raw;
}

inline ad::Var fixed_column(ad::Tape& tape, const std::vector<double>& v) {
  Matrix m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return tape.constant(std::move(m));
}

}  // namespace detail

// theta'_e = LeakyReLU( sum_{v in e} alpha_ve x_v W ), alpha normalized over
// the members of each hyperedge. `node_msg` is X W gathered per pair.
inline StageOutput node_to_edge(const GraphContext& ctx, const ad::Var& node_msg, const ad::Var& edge_attr,
                                const BoundLayer& layer, AttentionMode mode, double slope) {
  ad::Tape& tape = *node_msg.tape();
  ad::Var alpha;
  if (mode == AttentionMode::Learned) {
    const ad::Var edge_t = ad::gather_rows(ad::matmul(edge_attr, layer.node_transform), ctx.pair_edge);
    const ad::Var logits = ad::matmul(ad::leaky_relu(ad::concat_cols(node_msg, edge_t), slope), layer.attn_v2e);
    alpha = ad::segment_softmax(logits, ctx.by_edge_nonempty);
  } else {
    alpha = detail::fixed_column(tape, detail::fixed_coefficients(ctx, mode, true));
  }
  return {ad::leaky_relu(ad::segment_sum(node_msg, ctx.by_edge, alpha), slope), alpha};
}

// x'_v = LeakyReLU( sum_{e ni v} alpha_ev Omega_ee theta'_e W' ), alpha
// normalized over the hyperedges incident to v. Attention scores pair the
// node's transformed features with the transformed edge message.
inline StageOutput edge_to_node(const GraphContext& ctx, const ad::Var& node_msg, const ad::Var& new_edges,
                                const BoundLayer& layer, AttentionMode mode, double slope) {
  ad::Tape& tape = *node_msg.tape();
  const ad::Var edge_msg = ad::gather_rows(ad::matmul(new_edges, layer.edge_transform), ctx.pair_edge);
  ad::Var alpha;
  if (mode == AttentionMode::Learned) {
    const ad::Var logits = ad::matmul(ad::leaky_relu(ad::concat_cols(node_msg, edge_msg), slope), layer.attn_e2v);
    alpha = ad::segment_softmax(logits, ctx.by_node_nonisolated);
  } else {
    alpha = detail::fixed_column(tape, detail::fixed_coefficients(ctx, mode, false));
  }
  const ad::Var weighted = ad::scale_rows(edge_msg, ctx.pair_weight);
  return {ad::leaky_relu(ad::segment_sum(weighted, ctx.by_node, alpha), slope), alpha};
}

struct ConvOutput {
  ad::Var nodes;      // n x out
  ad::Var edges;      // m' x out, attributes for the next layer
  ad::Var alpha_v2e;  // P x 1
  ad::Var alpha_e2v;  // P x 1
};

inline ConvOutput hconv_att(const GraphContext& ctx, const ad::Var& x, const ad::Var& edge_attr,
                            const BoundLayer& layer, AttentionMode mode, double slope) {
  if (x.rows() != static_cast<Eigen::Index>(ctx.num_nodes) ||
      edge_attr.rows() != static_cast<Eigen::Index>(ctx.num_edges))
    throw ShapeError("hconv_att: feature rows do not match the incidence structure");
  if (x.cols() != layer.node_transform.rows() || edge_attr.cols() != layer.node_transform.rows())
    throw ShapeError("hconv_att: input width " + std::to_string(x.cols()) + " does not match layer width " +
                     std::to_string(layer.node_transform.rows()));
  const ad::Var node_msg = ad::gather_rows(ad::matmul(x, layer.node_transform), ctx.pair_node);
  const StageOutput v2e = node_to_edge(ctx, node_msg, edge_attr, layer, mode, slope);
  const StageOutput e2v = edge_to_node(ctx, node_msg, v2e.features, layer, mode, slope);
  return {e2v.features, v2e.features, v2e.attention, e2v.attention};
}

// theta^(0)_e: mean of member rows (zero for empty state columns).
inline ad::Var initial_edge_attributes(const GraphContext& ctx, const ad::Var& x) {
  return ad::segment_sum(ad::gather_rows(x, ctx.pair_node), ctx.by_edge, ctx.pair_member_mean);
}

// ---------------------------------------------------------------------------
// Full model
// ---------------------------------------------------------------------------

struct BoundModel {
  const ModelParams* params = nullptr;
  std::vector<ad::Var> vars;  // one per tensor, same order

  BoundLayer layer(const LayerSlots& s) const {
    return {vars[s.node_transform], vars[s.edge_transform], vars[s.attn_v2e], vars[s.attn_e2v]};
  }
};

// Places every tensor on the tape; trainable ones as variables.
inline BoundModel bind(ad::Tape& tape, const ModelParams& p, bool trainable = true) {
  BoundModel b;
  b.params = &p;
  for (const auto& t : p.tensors) b.vars.push_back(trainable ? tape.variable(t.value) : tape.constant(t.value));
  return b;
}

inline ad::Var run_stack(const GraphContext& ctx, const BoundModel& m, const std::vector<LayerSlots>& layers,
                         ad::Var x) {
  ad::Var edges = initial_edge_attributes(ctx, x);
  for (const auto& l : layers) {
    const ConvOutput out = hconv_att(ctx, x, edges, m.layer(l), m.params->config.attention, m.params->config.slope);
    x = out.nodes;
    edges = out.edges;
  }
  return x;
}

// Gamma = En(X, H').
inline ad::Var encode(const GraphContext& ctx, const BoundModel& m, const ad::Var& x) {
  if (x.cols() != static_cast<Eigen::Index>(m.params->config.feature_width()))
    throw ShapeError("encode: feature width " + std::to_string(x.cols()) + ", expected " +
                     std::to_string(m.params->config.feature_width()));
  return run_stack(ctx, m, m.params->encoder, x);
}

// X_hat = De(Gamma, H').
inline ad::Var decode(const GraphContext& ctx, const BoundModel& m, const ad::Var& latent) {
  return run_stack(ctx, m, m.params->decoder, latent);
}

struct FusionOutput {
  ad::Var entry;       // Gamma'
  ad::Var multi_head;  // Gamma'' (n x K * head_width)
  ad::Var averaged;    // Gamma''' (n x head_width)
  ad::Var logits;      // n x 2
  ad::Var probs;       // n x 2, column 0 = source
};

inline FusionOutput fusion_forward(const GraphContext& ctx, const BoundModel& m, const ad::Var& z) {
  const auto& cfg = m.params->config;
  FusionOutput f;
  const ad::Var edges0 = initial_edge_attributes(ctx, z);
  const ConvOutput entry = hconv_att(ctx, z, edges0, m.layer(m.params->entry), cfg.attention, cfg.slope);
  f.entry = entry.nodes;
  std::vector<ad::Var> head_nodes, head_edges;
  for (const auto& h : m.params->heads) {
    const ConvOutput o = hconv_att(ctx, entry.nodes, entry.edges, m.layer(h), cfg.attention, cfg.slope);
    head_nodes.push_back(o.nodes);
    head_edges.push_back(o.edges);
  }
  f.multi_head = ad::concat_cols(head_nodes);
  const ad::Var cat_edges = ad::concat_cols(head_edges);
  std::vector<ad::Var> finals;
  for (const auto& h : m.params->finals)
    finals.push_back(hconv_att(ctx, f.multi_head, cat_edges, m.layer(h), cfg.attention, cfg.slope).nodes);
  f.averaged = ad::row_mean_k(finals);
  f.logits = ad::add_row(ad::matmul(f.averaged, m.vars[m.params->projection]), m.vars[m.params->bias]);
  f.probs = ad::row_softmax(f.logits);
  return f;
}

struct ForwardResult {
  std::optional<ad::Var> latent;
  std::optional<ad::Var> reconstruction;
  FusionOutput fusion;
};

inline ForwardResult forward(const GraphContext& ctx, const BoundModel& m, const ad::Var& x) {
  ForwardResult r;
  if (m.params->config.use_autoencoder) {
    r.latent = encode(ctx, m, x);
    r.reconstruction = decode(ctx, m, *r.latent);
    r.fusion = fusion_forward(ctx, m, *r.latent);
  } else {
    r.fusion = fusion_forward(ctx, m, x);
  }
  return r;
}

// Source probabilities (column 0 of the softmax) without gradients.
inline std::vector<double> predict_scores(const GraphContext& ctx, const ModelParams& p, const Matrix& features) {
  ad::Tape tape;
  const BoundModel m = bind(tape, p, false);
  const ForwardResult r = forward(ctx, m, tape.constant(features));
  const Matrix& probs = r.fusion.probs.value();
  std::vector<double> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index v = 0; v < probs.rows(); ++v) out[static_cast<std::size_t>(v)] = probs(v, 0);
  return out;
}

// s_hat: nodes whose source probability is strictly above one half.
inline std::vector<NodeId> classify(const std::vector<double>& source_probs) {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < source_probs.size(); ++v)
    if (source_probs[v] > 0.5) out.push_back(v);
  return out;
}

inline std::vector<NodeId> classify(const Matrix& probs) {
  std::vector<double> col(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index v = 0; v < probs.rows(); ++v) col[static_cast<std::size_t>(v)] = probs(v, 0);
  return classify(col);
}

// ---------------------------------------------------------------------------
// Checkpoints: one line of JSON header, then the parameters as raw
// little-endian doubles in declared order (row-major within each tensor).
// ---------------------------------------------------------------------------

inline nlohmann::json checkpoint_header(const ModelParams& p, const nlohmann::json& extra = {}) {
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& t : p.tensors) manifest.push_back({{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}});
  nlohmann::json h = {{"format", "hyperdet-checkpoint"},
                      {"version", 1},
                      {"model", model_config_to_json(p.config)},
                      {"tensors", manifest},
                      {"count", p.count()}};
  if (!extra.is_null()) h["meta"] = extra;
  return h;
}

inline void save_checkpoint(const ModelParams& p, const std::string& path, const nlohmann::json& extra = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out << checkpoint_header(p, extra).dump() << '\n';
  for (const auto& t : p.tensors)
    out.write(reinterpret_cast<const char*>(t.value.data()), static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  if (!out) throw IoError("write failed for '" + path + "'");
}

struct Checkpoint {
  ModelParams params;
  nlohmann::json header;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty checkpoint");
  Checkpoint ck;
  try {
    ck.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& ex) {
    throw ParseError(path + ": bad checkpoint header: " + ex.what());
  }
  if (ck.header.value("format", "") != "hyperdet-checkpoint") throw ParseError(path + ": not a hyperdet checkpoint");
  ck.params = init_model(model_config_from_json(ck.header.at("model")));
  const auto& manifest = ck.header.at("tensors");
  if (manifest.size() != ck.params.tensors.size())
    throw ShapeError(path + ": checkpoint has " + std::to_string(manifest.size()) + " tensors, model expects " +
                     std::to_string(ck.params.tensors.size()));
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    auto& t = ck.params.tensors[i];
    if (manifest[i].at("name") != t.name || manifest[i].at("rows").get<Eigen::Index>() != t.value.rows() ||
        manifest[i].at("cols").get<Eigen::Index>() != t.value.cols())
      throw ShapeError(path + ": tensor " + std::to_string(i) + " (" + t.name + ") does not match the manifest");
    in.read(reinterpret_cast<char*>(t.value.data()), static_cast<std::streamsize>(t.value.size() * sizeof(double)));
    if (!in) throw ParseError(path + ": truncated parameter data");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError(path + ": trailing bytes after parameters");
  return ck;
}

}  // namespace hyperdet

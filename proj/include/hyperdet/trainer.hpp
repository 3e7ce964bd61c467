#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperdet/autodiff.hpp"
#include "hyperdet/diffusion.hpp"
#include "hyperdet/error.hpp"
#include "hyperdet/faf.hpp"
#include "hyperdet/irc.hpp"
#include "hyperdet/metrics.hpp"
#include "hyperdet/parallel.hpp"
#include "hyperdet/rng.hpp"

namespace hyperdet {

struct TrainConfig {
  double lr_pretrain = 0.01;
  double lr_finetune = 0.005;
  double lambda = 5e-4;
  std::size_t pretrain_epochs = 200;
  std::size_t finetune_epochs = 500;
  std::size_t patience = 50;
  // Snapshots per optimizer step. The default steps once per snapshot; 0 takes
  // a single step per epoch over all of them.
  std::size_t batch_size = 1;
  double validation_fraction = 0.125;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
  std::size_t threads = 1;

  void validate() const {
    if (!(lr_pretrain > 0.0) || !(lr_finetune > 0.0)) throw ConfigError("learning rates must be positive");
    if (!(lambda >= 0.0)) throw ConfigError("train.lambda must be non-negative");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw ConfigError("train.validation_fraction must lie in (0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
      throw ConfigError("invalid optimizer moments");
    if (finetune_epochs == 0) throw ConfigError("train.finetune_epochs must be positive");
    if (threads == 0) throw ConfigError("train.threads must be positive");
  }
};

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  return {{"lr_pretrain", c.lr_pretrain},         {"lr_finetune", c.lr_finetune},
          {"lambda", c.lambda},                   {"pretrain_epochs", c.pretrain_epochs},
          {"finetune_epochs", c.finetune_epochs}, {"patience", c.patience},
          {"batch_size", c.batch_size},           {"validation_fraction", c.validation_fraction},
          {"beta1", c.beta1},                     {"beta2", c.beta2},
          {"epsilon", c.epsilon},                 {"seed", c.seed}};
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline double reconstruction_loss(const Matrix& x, const Matrix& x_hat) {
  if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols()) throw ShapeError("reconstruction_loss: shape mismatch");
  return (x - x_hat).squaredNorm();
}

// rho = |s| / (n - |s|)
inline double balance_coefficient(std::size_t n, std::size_t num_sources) {
  if (num_sources == 0 || num_sources >= n)
    throw Error("balance coefficient needs 0 < |s| < n (got |s| = " + std::to_string(num_sources) +
                ", n = " + std::to_string(n) + ")");
  return static_cast<double>(num_sources) / static_cast<double>(n - num_sources);
}

// Per-node weights: 1 for sources, rho for the rest.
inline std::vector<double> balanced_weights(const std::vector<std::uint8_t>& source_labels) {
  const std::size_t s = static_cast<std::size_t>(std::count(source_labels.begin(), source_labels.end(), 1));
  const double rho = balance_coefficient(source_labels.size(), s);
  std::vector<double> w(source_labels.size());
  for (std::size_t v = 0; v < w.size(); ++v) w[v] = source_labels[v] ? 1.0 : rho;
  return w;
}

// Class index used by the classifier: 0 = source, 1 = non-source.
inline std::vector<std::uint8_t> class_indices(const std::vector<std::uint8_t>& source_labels) {
  std::vector<std::uint8_t> c(source_labels.size());
  for (std::size_t v = 0; v < c.size(); ++v) c[v] = source_labels[v] ? 0 : 1;
  return c;
}

inline ad::Var balanced_ce_loss(const ad::Var& probs, const std::vector<std::uint8_t>& source_labels) {
  return ad::weighted_ce(probs, class_indices(source_labels), balanced_weights(source_labels));
}

inline double balanced_ce_loss(const Matrix& probs, const std::vector<std::uint8_t>& source_labels) {
  ad::Tape t;
  return balanced_ce_loss(t.constant(probs), source_labels).scalar();
}

inline double total_loss(double l_ae, double l_af, const std::vector<Matrix>& params, double lambda) {
  double pen = 0.0;
  for (const auto& p : params) pen += p.squaredNorm();
  return l_ae + l_af + lambda * pen;
}

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

struct Sample {
  GraphContext ctx;
  Matrix features;
  std::vector<std::uint8_t> labels;  // 1 = source
  std::vector<NodeId> sources;
};

inline Sample make_sample(const Hypergraph& g, const Snapshot& s, const Matrix& features, bool include_dynamic) {
  if (features.rows() != static_cast<Eigen::Index>(s.num_nodes())) throw ShapeError("feature rows != node count");
  Sample out;
  out.ctx = make_context(augment_incidence(g, s, include_dynamic));
  out.features = features;
  out.labels = s.source_labels();
  out.sources = s.sources;
  std::sort(out.sources.begin(), out.sources.end());
  return out;
}

struct LossParts {
  ad::Var ae, af, penalty, total;
};

// L_ae + L_af + lambda * ||w||^2 for one snapshot on a fresh tape.
inline LossParts full_loss(const Sample& s, const BoundModel& m, double lambda) {
  ad::Tape& tape = *m.vars.front().tape();
  const ad::Var x = tape.constant(s.features);
  const ForwardResult r = forward(s.ctx, m, x);
  LossParts l;
  l.af = balanced_ce_loss(r.fusion.probs, s.labels);
  l.total = l.af;
  if (r.reconstruction) {
    l.ae = ad::squared_error(x, *r.reconstruction);
    l.total = ad::add(l.ae, l.total);
  }
  if (lambda > 0.0) {
    l.penalty = ad::scale(ad::l2_penalty(m.vars), lambda);
    l.total = ad::add(l.total, l.penalty);
  }
  return l;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

class Adam {
 public:
  Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  // Updates params[slots[i]] with grads[i].
  void step(std::vector<NamedTensor>& params, const std::vector<std::size_t>& slots, const std::vector<Matrix>& grads) {
    if (m_.empty()) {
      for (auto s : slots) {
        m_.push_back(Matrix::Zero(params[s].value.rows(), params[s].value.cols()));
        v_.push_back(m_.back());
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < slots.size(); ++i) {
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * grads[i];
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i].cwiseProduct(grads[i]);
      params[slots[i]].value.array() -=
          lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

// ---------------------------------------------------------------------------
// Training loops
// ---------------------------------------------------------------------------

struct EpochRecord {
  std::size_t epoch = 0;
  double l_ae = 0.0;
  double l_af = 0.0;
  double total = 0.0;
  std::optional<double> val_f1;
  std::optional<double> val_acc;
};

struct TrainReport {
  std::vector<EpochRecord> pretrain;
  std::vector<EpochRecord> finetune;
  bool pretrained = false;
  std::size_t best_epoch = 0;
  double best_val_f1 = 0.0;
  bool stopped_early = false;
  std::string checkpoint;
  double wall_clock_seconds = 0.0;  // kept out of the JSON so reports stay reproducible
};

inline nlohmann::json epochs_to_json(const std::vector<EpochRecord>& es) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& e : es) {
    nlohmann::json j = {{"epoch", e.epoch}, {"l_ae", e.l_ae}, {"l_af", e.l_af}, {"total", e.total}};
    if (e.val_f1) j["val_f1"] = *e.val_f1;
    if (e.val_acc) j["val_acc"] = *e.val_acc;
    a.push_back(j);
  }
  return a;
}

inline nlohmann::json train_report_to_json(const TrainReport& r) {
  return {{"pretrained", r.pretrained},
          {"pretrain", epochs_to_json(r.pretrain)},
          {"finetune", epochs_to_json(r.finetune)},
          {"best_epoch", r.best_epoch},
          {"best_val_f1", r.best_val_f1},
          {"stopped_early", r.stopped_early},
          {"checkpoint", r.checkpoint}};
}

namespace detail {

// Batches of sample indices for one epoch, in a seeded shuffled order.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t b = batch_size == 0 ? count : batch_size;
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < count; i += b)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(count, i + b)));
  return out;
}

struct SampleGrad {
  double l_ae = 0.0, l_af = 0.0, total = 0.0;
  std::vector<Matrix> grads;
};

inline void check_finite(double x, const char* what, std::size_t epoch) {
  if (!std::isfinite(x))
    throw NumericError(std::string("training diverged: non-finite ") + what + " at epoch " + std::to_string(epoch));
}

// Mean gradient over a batch. Per-sample work may run in parallel; the sum is
// taken in batch order so results do not depend on the thread count.
template <class Fn>
std::vector<SampleGrad> batch_grads(const std::vector<std::size_t>& batch, std::size_t threads, Fn&& per_sample) {
  std::vector<SampleGrad> out(batch.size());
  parallel_for(batch.size(), threads, [&](std::size_t i) { out[i] = per_sample(batch[i]); });
  return out;
}

inline std::vector<Matrix> average(const std::vector<SampleGrad>& parts) {
  std::vector<Matrix> acc = parts.front().grads;
  for (std::size_t i = 1; i < parts.size(); ++i)
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += parts[i].grads[k];
  for (auto& g : acc) g /= static_cast<double>(parts.size());
  return acc;
}

}  // namespace detail

// Minimizes mean L_ae over the snapshots, updating only the autoencoder
// tensors. Returns the parameters of the lowest-loss epoch.
inline ModelParams pretrain_autoencoder(const std::vector<Sample>& train, ModelParams params, const TrainConfig& cfg,
                                        TrainReport* report = nullptr) {
  cfg.validate();
  if (train.empty()) throw Error("pretraining needs at least one snapshot");
  if (!params.config.use_autoencoder) return params;
  const std::vector<std::size_t> slots = params.autoencoder_slots();
  Adam opt(cfg.lr_pretrain, cfg.beta1, cfg.beta2, cfg.epsilon);
  Rng rng(derive_seed(cfg.seed, 0x9e7));
  ModelParams best = params;
  double best_loss = std::numeric_limits<double>::infinity();

  auto per_sample = [&](std::size_t idx) {
    ad::Tape tape;
    BoundModel m;
    m.params = &params;
    std::vector<bool> trainable(params.tensors.size(), false);
    for (auto s : slots) trainable[s] = true;
    for (std::size_t i = 0; i < params.tensors.size(); ++i)
      m.vars.push_back(trainable[i] ? tape.variable(params.tensors[i].value) : tape.constant(params.tensors[i].value));
    const ad::Var x = tape.constant(train[idx].features);
    const ad::Var latent = encode(train[idx].ctx, m, x);
    const ad::Var loss = ad::squared_error(x, decode(train[idx].ctx, m, latent));
    tape.backward(loss);
    detail::SampleGrad g;
    g.l_ae = g.total = loss.scalar();
    for (auto s : slots) g.grads.push_back(m.vars[s].grad());
    return g;
  };

  for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& batch : detail::epoch_batches(train.size(), cfg.batch_size, rng)) {
      const auto parts = detail::batch_grads(batch, cfg.threads, per_sample);
      for (const auto& p : parts) rec.l_ae += p.l_ae;
      detail::check_finite(rec.l_ae, "reconstruction loss", epoch);
      opt.step(params.tensors, slots, detail::average(parts));
    }
    rec.l_ae /= static_cast<double>(train.size());
    rec.total = rec.l_ae;
    if (report) report->pretrain.push_back(rec);
    // rec.l_ae is measured before each batch's update, so it scores the
    // parameters as they were when the epoch started
    if (rec.l_ae < best_loss) {
      best_loss = rec.l_ae;
      best = params;
    }
  }
  if (cfg.pretrain_epochs == 0) return params;
  // One more evaluation scores the final parameters against the best seen.
  double final_loss = 0.0;
  for (std::size_t i = 0; i < train.size(); ++i) final_loss += per_sample(i).l_ae;
  final_loss /= static_cast<double>(train.size());
  if (report) report->pretrained = true;
  return final_loss < best_loss ? params : best;
}

// Mean per-snapshot F1 / accuracy of the current parameters.
inline Confusion evaluate_mean(const std::vector<Sample>& samples, const ModelParams& p, std::size_t threads = 1) {
  std::vector<Confusion> parts(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const auto scores = predict_scores(samples[i].ctx, p, samples[i].features);
    parts[i] = confusion_metrics(classify(scores), samples[i].sources, scores.size());
  });
  Confusion mean;
  for (const auto& c : parts) {
    mean.acc += c.acc;
    mean.precision += c.precision;
    mean.recall += c.recall;
    mean.f1 += c.f1;
  }
  const double k = samples.empty() ? 1.0 : static_cast<double>(samples.size());
  mean.acc /= k;
  mean.precision /= k;
  mean.recall /= k;
  mean.f1 /= k;
  return mean;
}

// Joint optimization of the full model against the total loss, early-stopped
// on validation F1. Returns the parameters of the best-F1 epoch (earliest on
// ties).
inline ModelParams finetune(const std::vector<Sample>& train, const std::vector<Sample>& val, ModelParams params,
                            const TrainConfig& cfg, TrainReport* report = nullptr) {
  cfg.validate();
  if (train.empty()) throw Error("fine-tuning needs at least one training snapshot");
  if (val.empty()) throw Error("fine-tuning needs at least one validation snapshot");
  std::vector<std::size_t> slots(params.tensors.size());
  std::iota(slots.begin(), slots.end(), std::size_t{0});
  Adam opt(cfg.lr_finetune, cfg.beta1, cfg.beta2, cfg.epsilon);
  Rng rng(derive_seed(cfg.seed, 0xf17));
  ModelParams best = params;
  double best_f1 = -1.0;
  std::size_t since_best = 0;

  auto per_sample = [&](std::size_t idx) {
    ad::Tape tape;
    const BoundModel m = bind(tape, params, true);
    const LossParts l = full_loss(train[idx], m, cfg.lambda);
    tape.backward(l.total);
    detail::SampleGrad g;
    g.l_ae = params.config.use_autoencoder ? l.ae.scalar() : 0.0;
    g.l_af = l.af.scalar();
    g.total = l.total.scalar();
    for (const auto& v : m.vars) g.grads.push_back(v.grad());
    return g;
  };

  for (std::size_t epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    for (const auto& batch : detail::epoch_batches(train.size(), cfg.batch_size, rng)) {
      const auto parts = detail::batch_grads(batch, cfg.threads, per_sample);
      for (const auto& p : parts) {
        rec.l_ae += p.l_ae;
        rec.l_af += p.l_af;
        rec.total += p.total;
      }
      detail::check_finite(rec.total, "total loss", epoch);
      opt.step(params.tensors, slots, detail::average(parts));
    }
    const double k = static_cast<double>(train.size());
    rec.l_ae /= k;
    rec.l_af /= k;
    rec.total /= k;
    const Confusion v = evaluate_mean(val, params, cfg.threads);
    rec.val_f1 = v.f1;
    rec.val_acc = v.acc;
    if (report) report->finetune.push_back(rec);
    if (v.f1 > best_f1) {
      best_f1 = v.f1;
      best = params;
      since_best = 0;
      if (report) {
        report->best_epoch = epoch;
        report->best_val_f1 = v.f1;
      }
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      if (report) report->stopped_early = true;
      break;
    }
  }
  return best;
}

// Splits off the last ceil(fraction * n) training samples for validation.
inline std::pair<std::vector<Sample>, std::vector<Sample>> split_validation(std::vector<Sample> train,
                                                                            double fraction) {
  if (train.size() < 2) throw Error("need at least two training snapshots to hold out validation data");
  const std::size_t nval = std::clamp<std::size_t>(fraction_count(fraction, train.size()), 1, train.size() - 1);
  std::vector<Sample> val(std::make_move_iterator(train.end() - static_cast<std::ptrdiff_t>(nval)),
                          std::make_move_iterator(train.end()));
  train.resize(train.size() - nval);
  return {std::move(train), std::move(val)};
}

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

// Pretraining (skipped without an autoencoder) followed by fine-tuning.
inline TrainResult train_model(const std::vector<Sample>& train, const std::vector<Sample>& val,
                               const ModelConfig& model, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  TrainResult r;
  r.params = init_model(model);
  if (model.use_autoencoder) r.params = pretrain_autoencoder(train, std::move(r.params), cfg, &r.report);
  r.params = finetune(train, val, std::move(r.params), cfg, &r.report);
  r.report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace hyperdet

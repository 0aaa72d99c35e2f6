// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/errors.hpp"
#include "fpflow/eval/metrics.hpp"
#include "fpflow/scoring.hpp"
#include "fpflow/train/adamw.hpp"
#include "fpflow/train/losses.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fpflow::train {

enum class Variant { mle, frozen, finetune };
enum class MarginMode { fixed, adaptive };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::mle: return "mle";
    case Variant::frozen: return "frozen";
    case Variant::finetune: return "finetune";
  }
  return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "mle") return Variant::mle;
  if (s == "frozen") return Variant::frozen;
  if (s == "finetune") return Variant::finetune;
  return std::nullopt;
}

struct TrainConfig {
  Variant variant = Variant::mle;
  int epochs = 200;
  double lr = 1e-3;
  double weight_decay = 1e-1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::size_t batch_tp = 256;
  std::size_t batch_fp = 256;
  MarginMode margin_mode = MarginMode::adaptive;
  double margin_value = 0.0;
  std::uint64_t seed = 0;

  /// Optimizer settings and batch sizes used for 2048-d backbone features.
  static TrainConfig backbone_preset(Variant v) {
    TrainConfig c;
    c.variant = v;
    c.epochs = 100;
    c.lr = 1e-5;
    c.weight_decay = 1e-1;
    c.batch_tp = c.batch_fp = (v == Variant::finetune) ? 32 : 2048;
    return c;
  }

  AdamWConfig optimizer() const { return {lr, beta1, beta2, eps_adam, weight_decay}; }
};

struct EpochRecord {
  int epoch = 0;
  double loss_tp = 0.0;
  double loss_fp = 0.0;
  double val_ap = std::numeric_limits<double>::quiet_NaN();
  double val_auc = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct TrainTrace {
  std::vector<EpochRecord> epochs;

  /// CSV: epoch,loss_tp,loss_fp,val_ap,val_auc,seconds
  void write_csv(std::ostream& os, bool with_time = true) const {
    os << "epoch,loss_tp,loss_fp,val_ap,val_auc" << (with_time ? ",seconds" : "") << '\n';
    for (const auto& e : epochs) {
      os << e.epoch << ',' << fmt(e.loss_tp) << ',' << fmt(e.loss_fp) << ',' << fmt(e.val_ap)
         << ',' << fmt(e.val_auc);
      if (with_time) os << ',' << fmt(e.seconds);
      os << '\n';
    }
  }

  static std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
  }
};

/// Read-only feature rows that count how many rows have been read. The
/// counter lets tests verify that a training variant never touches FPs.
class FeatureRows {
 public:
  FeatureRows() = default;
  explicit FeatureRows(Tensor rows) : rows_(std::move(rows)) {}

  std::size_t size() const { return std::size_t(rows_.rows()); }
  Eigen::Index cols() const { return rows_.cols(); }
  bool empty() const { return rows_.rows() == 0; }
  std::size_t reads() const { return reads_; }

  Tensor gather(std::span<const std::size_t> idx) const {
    Tensor out(Eigen::Index(idx.size()), rows_.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(Eigen::Index(i)) = rows_.row(Eigen::Index(idx[i]));
    reads_ += idx.size();
    return out;
  }

  const Tensor& all() const {
    reads_ += size();
    return rows_;
  }

 private:
  Tensor rows_;
  mutable std::size_t reads_ = 0;
};

struct TrainData {
  FeatureRows tp;
  FeatureRows fp;
  /// Validation split used for the adaptive margin and checkpoint selection.
  Tensor val_x;
  std::vector<Label> val_labels;
};

struct TrainResult {
  EncoderModel encoder;
  flow::FlowModel flow;
  TrainTrace trace;
  /// Margin used by the FP hinge; NaN for MLE.
  double margin = std::numeric_limits<double>::quiet_NaN();
  /// 1-based epoch of the retained parameters.
  int best_epoch = 0;
  std::vector<std::string> events;
};

using EventSink = std::function<void(const std::string&)>;

namespace detail {

struct Snapshot {
  std::vector<Tensor> params;
  AdamWState state;
};

inline std::vector<Tensor> copy_params(std::span<Tensor* const> params) {
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Tensor* p : params) out.push_back(*p);
  return out;
}

inline void restore_params(std::span<Tensor* const> params, const std::vector<Tensor>& saved) {
  for (std::size_t i = 0; i < params.size(); ++i) *params[i] = saved[i];
}

/// Draws FP batches from a reshuffled permutation, wrapping around at the end.
class CyclingSampler {
 public:
  CyclingSampler(std::size_t n, std::uint64_t seed) : order_(iota_indices(n)), rng_(seed) {
    shuffle_in_place(order_, rng_);
  }
  std::vector<std::size_t> next(std::size_t count) {
    std::vector<std::size_t> out;
    out.reserve(count);
    while (out.size() < count && !order_.empty()) {
      if (cursor_ == order_.size()) {
        shuffle_in_place(order_, rng_);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  Rng rng_;
  std::size_t cursor_ = 0;
};

}  // namespace detail

/// Trains the flow (and, for Finetune, the encoder) on TP maximum likelihood
/// plus, for Frozen/Finetune, the FP margin hinge. Returns the parameters of
/// the epoch with the best validation AP (lowest validation TP NLL when the
/// validation split lacks one of the labels; the last epoch without a
/// validation split).
inline TrainResult train(const TrainData& data, EncoderModel enc, flow::FlowModel model,
                         const TrainConfig& cfg, const EventSink& sink = {}) {
  TrainResult result;
  auto log = [&](std::string msg) {
    if (sink) sink(msg);
    result.events.push_back(std::move(msg));
  };

  if (data.tp.empty()) throw ConfigError("train: at least one TP sample is required");
  if (cfg.variant != Variant::mle && data.fp.empty()) {
    throw ConfigError("train: variant '" + std::string(to_string(cfg.variant)) +
                      "' requires FP samples but none were provided");
  }
  if (cfg.epochs < 1 || cfg.batch_tp == 0 || (cfg.variant != Variant::mle && cfg.batch_fp == 0)) {
    throw ConfigError("train: epochs and batch sizes must be positive");
  }
  if (!(cfg.lr > 0.0)) throw ConfigError("train: learning rate must be positive");
  if (data.tp.cols() != enc.in_dim() || enc.out_dim() != model.dim()) {
    throw ConfigError("train: feature/encoder/flow dimensions do not line up (" +
                      std::to_string(data.tp.cols()) + " -> " + std::to_string(enc.in_dim()) +
                      "/" + std::to_string(enc.out_dim()) + " -> " +
                      std::to_string(model.dim()) + ")");
  }
  if (data.val_x.rows() != Eigen::Index(data.val_labels.size())) {
    throw ConfigError("train: validation features and labels differ in length");
  }
  if (data.val_x.rows() > 0 && data.val_x.cols() != enc.in_dim()) {
    throw ConfigError("train: validation feature dimension mismatch");
  }

  const bool finetune = cfg.variant == Variant::finetune;
  if (finetune && enc.kind() == EncoderKind::identity) {
    throw ConfigError("train: finetune needs a trainable encoder (linear or mlp)");
  }
  enc.set_trainable(finetune);
  const bool uses_fp = cfg.variant != Variant::mle;

  std::vector<Tensor*> params = model.parameters();
  if (finetune) {
    for (Tensor* p : enc.parameters()) params.push_back(p);
  }
  AdamWConfig opt = cfg.optimizer();
  AdamWState state = AdamWState::zeros_like(params);

  Rng tp_rng(derive_seed(cfg.seed, {1}));
  std::optional<detail::CyclingSampler> fp_sampler;
  if (uses_fp) fp_sampler.emplace(data.fp.size(), derive_seed(cfg.seed, {2}));

  std::optional<double> margin;
  if (uses_fp && cfg.margin_mode == MarginMode::fixed) margin = cfg.margin_value;

  // Validation bookkeeping.
  eval::ScoredSet val;
  val.labels = data.val_labels;
  const bool val_ranked = val.has_both_labels();
  Tensor val_tp;
  {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < data.val_labels.size(); ++i)
      if (data.val_labels[i] == Label::tp) rows.push_back(Eigen::Index(i));
    val_tp.resize(Eigen::Index(rows.size()), data.val_x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) val_tp.row(Eigen::Index(i)) = data.val_x.row(rows[i]);
  }

  std::optional<double> best_key;
  std::vector<Tensor> best_params = detail::copy_params(params);
  int pathologies = 0;

  std::vector<std::size_t> tp_order = iota_indices(data.tp.size());
  for (int epoch = 1; epoch <= cfg.epochs;) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::Snapshot start{detail::copy_params(params), state};
    shuffle_in_place(tp_order, tp_rng);

    double sum_tp = 0.0, sum_fp = 0.0;
    std::size_t steps = 0;
    bool aborted = false;
    for (std::size_t begin = 0; begin < tp_order.size(); begin += cfg.batch_tp) {
      const std::size_t end = std::min(tp_order.size(), begin + cfg.batch_tp);
      const Tensor tp_batch =
          data.tp.gather(std::span<const std::size_t>(tp_order).subspan(begin, end - begin));
      Tensor fp_batch(0, data.tp.cols());
      if (uses_fp && margin) fp_batch = data.fp.gather(fp_sampler->next(cfg.batch_fp));

      Tape tape;
      const ModelBinding binding = bind(tape, enc, model);
      const LossNodes loss = total_loss(tape, tp_batch, fp_batch, enc, model, binding,
                                        margin.value_or(0.0));
      const double value = tape.scalar(loss.total);
      if (!std::isfinite(value)) {
        aborted = true;
        break;
      }
      tape.backward(loss.total);

      std::vector<const Tensor*> grads;
      grads.reserve(params.size());
      for (NodeId id : binding.flow) grads.push_back(&tape.grad(id));
      if (finetune)
        for (NodeId id : binding.encoder) grads.push_back(&tape.grad(id));
      if (!adamw_step(params, grads, state, opt)) {
        log("epoch " + std::to_string(epoch) + ": non-finite gradient, step skipped");
      }
      sum_tp += tape.scalar(loss.tp);
      if (loss.has_fp) sum_fp += tape.scalar(loss.fp);
      ++steps;
    }

    if (aborted) {
      detail::restore_params(params, start.params);
      state = std::move(start.state);
      if (++pathologies > 1) {
        throw NumericError("train: non-finite loss occurred again in epoch " +
                           std::to_string(epoch) + " after halving the learning rate");
      }
      opt.lr *= 0.5;
      log("epoch " + std::to_string(epoch) + ": non-finite loss, parameters restored, lr -> " +
          TrainTrace::fmt(opt.lr));
      continue;
    }

    if (uses_fp && !margin) {
      const Eigen::VectorXd ll = val_tp.rows() > 0 ? log_likelihoods(val_tp, enc, model)
                                                   : log_likelihoods(data.tp.all(), enc, model);
      const double mean = ll.mean();
      const double var = ll.size() > 1 ? (ll.array() - mean).square().sum() / double(ll.size() - 1) : 0.0;
      margin = mean - 2.0 * std::sqrt(var);
      if (!std::isfinite(*margin)) throw NumericError("train: adaptive margin is not finite");
      log("adaptive margin set to " + TrainTrace::fmt(*margin));
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss_tp = sum_tp / double(steps);
    rec.loss_fp = sum_fp / double(steps);

    std::optional<double> key;
    if (data.val_x.rows() > 0) {
      Eigen::VectorXd s = anomaly_scores(data.val_x, enc, model);
      val.scores.assign(s.data(), s.data() + s.size());
      sanitize_scores(val.scores);
      if (val_ranked) {
        rec.val_ap = eval::average_precision(val);
        rec.val_auc = eval::roc_auc(val);
        key = rec.val_ap;
      } else if (val_tp.rows() > 0) {
        key = log_likelihoods(val_tp, enc, model).mean();
      }
    } else {
      key = double(epoch);
    }
    if (key && std::isnan(*key)) key.reset();
    if (key && (!best_key || *key > *best_key)) {
      best_key = key;
      best_params = detail::copy_params(params);
      result.best_epoch = epoch;
    }

    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.trace.epochs.push_back(rec);
    ++epoch;
  }

  if (result.best_epoch == 0) {
    result.best_epoch = cfg.epochs;
    best_params = detail::copy_params(params);
  }
  detail::restore_params(params, best_params);
  result.encoder = std::move(enc);
  result.flow = std::move(model);
  result.margin = margin.value_or(std::numeric_limits<double>::quiet_NaN());
  return result;
}

}  // namespace fpflow::train

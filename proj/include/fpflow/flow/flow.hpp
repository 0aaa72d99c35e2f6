// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/perceptron.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpflow::flow {

/// Affine coupling layer. One half of the input passes through unchanged and
/// conditions a scale/shift of the other half:
///
///   b_keep  = a_keep
///   b_other = exp(s) * (a_other + t),   s = s_max * tanh(g_s(a_keep)),  t = g_t(a_keep)
///
/// log|det J| = sum_j s_j. Clamping s to [-s_max, s_max] keeps exp(s) finite.
struct CouplingLayer {
  Perceptron scale_net;
  Perceptron shift_net;
  bool transform_second_half = true;
  double s_max = 2.0;

  Eigen::Index dim() const { return 2 * scale_net.in_dim(); }
  Eigen::Index half() const { return scale_net.in_dim(); }
  Eigen::Index keep_begin() const { return transform_second_half ? 0 : half(); }
  Eigen::Index other_begin() const { return transform_second_half ? half() : 0; }

  std::vector<Tensor*> parameters() {
    auto p = scale_net.parameters();
    for (Tensor* t : shift_net.parameters()) p.push_back(t);
    return p;
  }
  std::vector<const Tensor*> parameters() const {
    auto p = scale_net.parameters();
    for (const Tensor* t : shift_net.parameters()) p.push_back(t);
    return p;
  }
};

struct FlowConfig {
  Eigen::Index dim = 2;
  int layers = 32;
  /// 0 selects max(8, dim / 4).
  Eigen::Index hidden = 0;
  /// Hidden layers inside each of g_s and g_t.
  int mlp_hidden_layers = 1;
  double s_max = 2.0;
  std::uint64_t seed = 0;

  Eigen::Index resolved_hidden() const {
    return hidden > 0 ? hidden : std::max<Eigen::Index>(8, dim / 4);
  }
};

/// Composition h_N o ... o h_1 of coupling layers over a standard normal base.
/// Consecutive layers alternate which half they transform, starting with the
/// second half.
class FlowModel {
 public:
  FlowModel() = default;

  /// Flow with the given layers; all must share one even dimension `dim`.
  FlowModel(Eigen::Index dim, std::vector<CouplingLayer> layers)
      : dim_(dim), layers_(std::move(layers)) {
    validate();
  }

  /// Identity-initialized flow: hidden weights uniform, output maps zero.
  static FlowModel create(const FlowConfig& cfg) {
    if (cfg.dim <= 0 || cfg.dim % 2 != 0) {
      throw std::invalid_argument("flow: dimension must be positive and even, got " +
                                  std::to_string(cfg.dim));
    }
    if (cfg.layers < 0 || cfg.mlp_hidden_layers < 0 || cfg.s_max <= 0.0) {
      throw std::invalid_argument("flow: invalid layer count, depth or s_max");
    }
    Rng rng(cfg.seed);
    const Eigen::Index m = cfg.dim / 2;
    std::vector<Eigen::Index> widths{m};
    for (int i = 0; i < cfg.mlp_hidden_layers; ++i) widths.push_back(cfg.resolved_hidden());
    widths.push_back(m);

    std::vector<CouplingLayer> layers;
    for (int i = 0; i < cfg.layers; ++i) {
      CouplingLayer layer;
      layer.scale_net = Perceptron::create(widths, rng, true);
      layer.shift_net = Perceptron::create(widths, rng, true);
      layer.transform_second_half = (i % 2 == 0);
      layer.s_max = cfg.s_max;
      layers.push_back(std::move(layer));
    }
    return FlowModel(cfg.dim, std::move(layers));
  }

  Eigen::Index dim() const { return dim_; }
  std::size_t size() const { return layers_.size(); }
  const std::vector<CouplingLayer>& layers() const { return layers_; }
  std::vector<CouplingLayer>& layers() { return layers_; }

  Eigen::Index hidden() const {
    if (layers_.empty() || layers_[0].scale_net.depth() < 2) return 0;
    return layers_[0].scale_net.weights[0].cols();
  }
  int mlp_hidden_layers() const {
    return layers_.empty() ? 1 : int(layers_[0].scale_net.depth()) - 1;
  }
  double s_max() const { return layers_.empty() ? 2.0 : layers_[0].s_max; }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> p;
    for (auto& l : layers_)
      for (Tensor* t : l.parameters()) p.push_back(t);
    return p;
  }
  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> p;
    for (const auto& l : layers_)
      for (const Tensor* t : l.parameters()) p.push_back(t);
    return p;
  }

 private:
  void validate() const {
    if (dim_ <= 0 || dim_ % 2 != 0) {
      throw std::invalid_argument("flow: dimension must be positive and even, got " +
                                  std::to_string(dim_));
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.dim() != dim_ || l.shift_net.in_dim() != dim_ / 2 ||
          l.scale_net.out_dim() != dim_ / 2 || l.shift_net.out_dim() != dim_ / 2) {
        throw std::invalid_argument("flow: layer " + std::to_string(i) +
                                    " does not match dimension " + std::to_string(dim_));
      }
      if (!(l.s_max > 0.0)) throw std::invalid_argument("flow: s_max must be positive");
    }
  }

  Eigen::Index dim_ = 2;
  std::vector<CouplingLayer> layers_;
};

/// Batch result: one transformed row and one log-determinant per input row.
struct BatchResult {
  Tensor out;
  Eigen::VectorXd logdet;
};

/// Single-vector result.
struct VectorResult {
  Eigen::VectorXd out;
  double logdet = 0.0;
};

namespace detail {

inline void check_input(Eigen::Index cols, Eigen::Index dim, const char* where) {
  if (dim % 2 != 0) {
    throw std::invalid_argument(std::string(where) + ": odd dimension " + std::to_string(dim));
  }
  if (cols != dim) {
    throw std::invalid_argument(std::string(where) + ": input length " + std::to_string(cols) +
                                " does not match dimension " + std::to_string(dim));
  }
}

inline Tensor clamped_scale(const CouplingLayer& layer, const Tensor& keep) {
  return (layer.s_max * layer.scale_net.forward(keep).array().tanh()).matrix();
}

}  // namespace detail

inline BatchResult coupling_forward_batch(const Tensor& a, const CouplingLayer& layer) {
  const Eigen::Index d = layer.dim();
  detail::check_input(a.cols(), d, "coupling_forward");
  const Eigen::Index m = layer.half();
  const Tensor keep = a.middleCols(layer.keep_begin(), m);
  const Tensor s = detail::clamped_scale(layer, keep);
  const Tensor t = layer.shift_net.forward(keep);

  BatchResult r;
  r.out = a;
  r.out.middleCols(layer.other_begin(), m) =
      (s.array().exp() * (a.middleCols(layer.other_begin(), m) + t).array()).matrix();
  r.logdet = s.rowwise().sum();
  return r;
}

inline Tensor coupling_inverse_batch(const Tensor& b, const CouplingLayer& layer) {
  const Eigen::Index d = layer.dim();
  detail::check_input(b.cols(), d, "coupling_inverse");
  const Eigen::Index m = layer.half();
  const Tensor keep = b.middleCols(layer.keep_begin(), m);
  const Tensor s = detail::clamped_scale(layer, keep);
  const Tensor t = layer.shift_net.forward(keep);

  Tensor a = b;
  a.middleCols(layer.other_begin(), m) =
      ((-s.array()).exp() * b.middleCols(layer.other_begin(), m).array() - t.array()).matrix();
  return a;
}

inline VectorResult coupling_forward(const Eigen::VectorXd& a, const CouplingLayer& layer) {
  BatchResult r = coupling_forward_batch(a.transpose(), layer);
  return {r.out.row(0).transpose(), r.logdet(0)};
}

inline Eigen::VectorXd coupling_inverse(const Eigen::VectorXd& b, const CouplingLayer& layer) {
  return coupling_inverse_batch(b.transpose(), layer).row(0).transpose();
}

/// z = H(e) and the per-row sum of per-layer log-determinants, accumulated in
/// layer order starting from 0.
inline BatchResult flow_forward_batch(const Tensor& e, const FlowModel& model) {
  detail::check_input(e.cols(), model.dim(), "flow_forward");
  BatchResult r{e, Eigen::VectorXd::Zero(e.rows())};
  for (const auto& layer : model.layers()) {
    BatchResult step = coupling_forward_batch(r.out, layer);
    r.out = std::move(step.out);
    r.logdet += step.logdet;
  }
  return r;
}

inline Tensor flow_inverse_batch(const Tensor& z, const FlowModel& model) {
  detail::check_input(z.cols(), model.dim(), "flow_inverse");
  Tensor e = z;
  const auto& layers = model.layers();
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) e = coupling_inverse_batch(e, *it);
  return e;
}

inline VectorResult flow_forward(const Eigen::VectorXd& e, const FlowModel& model) {
  BatchResult r = flow_forward_batch(e.transpose(), model);
  return {r.out.row(0).transpose(), r.logdet(0)};
}

inline Eigen::VectorXd flow_inverse(const Eigen::VectorXd& z, const FlowModel& model) {
  return flow_inverse_batch(z.transpose(), model).row(0).transpose();
}

/// log N(z; 0, I) for each row.
inline Eigen::VectorXd standard_normal_log_density(const Tensor& z) {
  const double norm = -0.5 * double(z.cols()) * std::log(2.0 * std::numbers::pi);
  return (norm - 0.5 * z.rowwise().squaredNorm().array()).matrix();
}

/// log p(e) = log N(H(e); 0, I) + log|det dH/de|, one value per row.
/// Rows whose value is not finite are left as-is; callers flag them.
inline Eigen::VectorXd log_likelihood_batch(const Tensor& e, const FlowModel& model) {
  BatchResult r = flow_forward_batch(e, model);
  return standard_normal_log_density(r.out) + r.logdet;
}

inline double log_likelihood(const Eigen::VectorXd& e, const FlowModel& model) {
  return log_likelihood_batch(e.transpose(), model)(0);
}

/// n draws from the model: z ~ N(0, I) pushed through the inverse flow.
inline Tensor sample(std::size_t n, const FlowModel& model, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample: n must be at least 1");
  Rng rng(seed);
  return flow_inverse_batch(normal_matrix(Eigen::Index(n), model.dim(), rng), model);
}

/// Tape version of log_likelihood_batch. `e` is a (batch x dim) node and
/// `param_ids` are leaves bound from model.parameters(). Returns a (batch x 1) node.
inline NodeId taped_log_likelihood(Tape& tape, NodeId e, const FlowModel& model,
                                   std::span<const NodeId> param_ids) {
  const Eigen::Index d = model.dim();
  detail::check_input(tape.value(e).cols(), d, "taped_log_likelihood");
  const Eigen::Index rows = tape.value(e).rows();
  const Eigen::Index m = d / 2;

  NodeId h = e;
  NodeId logdet = 0;
  bool have_logdet = false;
  std::size_t offset = 0;
  for (const auto& layer : model.layers()) {
    const std::size_t ns = layer.scale_net.parameter_count();
    const std::size_t nt = layer.shift_net.parameter_count();
    const auto s_ids = param_ids.subspan(offset, ns);
    const auto t_ids = param_ids.subspan(offset + ns, nt);
    offset += ns + nt;

    const NodeId keep = tape.slice(h, layer.keep_begin(), m);
    const NodeId other = tape.slice(h, layer.other_begin(), m);
    const NodeId s = tape.scale(tape.tanh(taped_forward(tape, keep, s_ids)), layer.s_max);
    const NodeId t = taped_forward(tape, keep, t_ids);
    const NodeId moved = tape.mul(tape.exp(s), tape.add(other, t));
    h = layer.transform_second_half ? tape.concat(keep, moved) : tape.concat(moved, keep);

    const NodeId ld = tape.sum(s, grad::Axis::row);
    logdet = have_logdet ? tape.add(logdet, ld) : ld;
    have_logdet = true;
  }
  if (offset != param_ids.size()) {
    throw std::invalid_argument("taped_log_likelihood: parameter id count mismatch");
  }

  const NodeId sq = tape.sum(tape.mul(h, h), grad::Axis::row);
  const double norm = -0.5 * double(d) * std::log(2.0 * std::numbers::pi);
  NodeId logp = tape.add(tape.scale(sq, -0.5), tape.constant(Tensor::Constant(rows, 1, norm)));
  if (have_logdet) logp = tape.add(logp, logdet);
  return logp;
}

}  // namespace fpflow::flow

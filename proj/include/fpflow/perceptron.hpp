// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/grad/tape.hpp"
#include "fpflow/random.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpflow {

using grad::NodeId;
using grad::Tape;
using grad::Tensor;

/// Stack of affine maps with tanh between consecutive maps (none after the
/// last). Weights are (in x out), biases (1 x out); inputs are one sample per row.
struct Perceptron {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  /// `widths` lists every layer width including input and output, so
  /// {in, hidden, out} has one hidden layer.
  /// Weights are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases are
  /// zero; with `zero_output` the last affine map is all zeros.
  static Perceptron create(std::span<const Eigen::Index> widths, Rng& rng,
                           bool zero_output) {
    if (widths.size() < 2) throw std::invalid_argument("perceptron needs >= 2 widths");
    Perceptron p;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      const Eigen::Index fan_in = widths[i];
      const Eigen::Index fan_out = widths[i + 1];
      const bool last = i + 2 == widths.size();
      if (last && zero_output) {
        p.weights.push_back(Tensor::Zero(fan_in, fan_out));
      } else {
        p.weights.push_back(uniform_matrix(fan_in, fan_out, 1.0 / std::sqrt(double(fan_in)), rng));
      }
      p.biases.push_back(Tensor::Zero(1, fan_out));
    }
    return p;
  }

  Eigen::Index in_dim() const { return weights.front().rows(); }
  Eigen::Index out_dim() const { return weights.back().cols(); }
  std::size_t depth() const { return weights.size(); }

  Tensor forward(const Tensor& x) const {
    if (x.cols() != in_dim()) {
      throw std::invalid_argument("perceptron: input has " + std::to_string(x.cols()) +
                                  " columns, expected " + std::to_string(in_dim()));
    }
    Tensor h = x;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      Tensor next;
      next.noalias() = h * weights[i];
      next.rowwise() += biases[i].row(0);
      if (i + 1 < weights.size()) next = next.array().tanh().matrix();
      h = std::move(next);
    }
    return h;
  }

  /// Parameters in serialization order: w0, b0, w1, b1, ...
  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.push_back(&weights[i]);
      out.push_back(&biases[i]);
    }
    return out;
  }
  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> out;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      out.push_back(&weights[i]);
      out.push_back(&biases[i]);
    }
    return out;
  }
  std::size_t parameter_count() const { return 2 * weights.size(); }
};

/// Same computation as Perceptron::forward, recorded on a tape. `ids` are the
/// tape leaves of the parameters in Perceptron::parameters() order.
inline NodeId taped_forward(Tape& tape, NodeId x, std::span<const NodeId> ids) {
  NodeId h = x;
  const std::size_t layers = ids.size() / 2;
  for (std::size_t i = 0; i < layers; ++i) {
    h = tape.add(tape.matmul(h, ids[2 * i]), ids[2 * i + 1]);
    if (i + 1 < layers) h = tape.tanh(h);
  }
  return h;
}

/// Registers parameter tensors as tape leaves (copies), in order.
inline std::vector<NodeId> bind_parameters(Tape& tape,
                                           std::span<const Tensor* const> params,
                                           bool trainable) {
  std::vector<NodeId> ids;
  ids.reserve(params.size());
  for (const Tensor* p : params) {
    ids.push_back(trainable ? tape.variable(*p) : tape.constant(*p));
  }
  return ids;
}

}  // namespace fpflow

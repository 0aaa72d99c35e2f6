// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/grad/tape.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace fpflow::train {

using grad::Tensor;

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-1;
};

struct AdamWState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  static AdamWState zeros_like(std::span<Tensor* const> params) {
    AdamWState s;
    for (const Tensor* p : params) {
      s.m.push_back(Tensor::Zero(p->rows(), p->cols()));
      s.v.push_back(Tensor::Zero(p->rows(), p->cols()));
    }
    return s;
  }
};

/// Decoupled weight decay Adam:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
/// with bias-corrected moments. Returns false (and leaves params and state
/// untouched) if any gradient entry is not finite.
inline bool adamw_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
                       AdamWState& state, const AdamWConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adamw_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i]->rows() != params[i]->rows() || grads[i]->cols() != params[i]->cols()) {
      throw std::invalid_argument("adamw_step: gradient shape mismatch at parameter " +
                                  std::to_string(i));
    }
    if (!grads[i]->allFinite()) return false;
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    const auto m_hat = state.m[i].array() / bc1;
    const auto v_hat = state.v[i].array() / bc2;
    p.array() -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * p.array());
  }
  return true;
}

}  // namespace fpflow::train

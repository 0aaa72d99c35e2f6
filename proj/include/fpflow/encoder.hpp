// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/perceptron.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fpflow {

enum class EncoderKind { identity, linear, mlp };

inline std::string_view to_string(EncoderKind k) {
  switch (k) {
    case EncoderKind::identity: return "identity";
    case EncoderKind::linear: return "linear";
    case EncoderKind::mlp: return "mlp";
  }
  return "?";
}

inline std::optional<EncoderKind> parse_encoder_kind(std::string_view s) {
  if (s == "identity") return EncoderKind::identity;
  if (s == "linear") return EncoderKind::linear;
  if (s == "mlp") return EncoderKind::mlp;
  return std::nullopt;
}

/// Feature adapter in front of the flow: identity, a single affine map, or
/// in -> 2*out (tanh) -> out.
class EncoderModel {
 public:
  EncoderModel() = default;

  static EncoderModel identity(Eigen::Index dim) {
    check_out_dim(dim);
    EncoderModel e;
    e.kind_ = EncoderKind::identity;
    e.in_dim_ = e.out_dim_ = dim;
    return e;
  }

  /// Affine map with identity weights (in_dim == out_dim) or uniform
  /// U(-1/sqrt(in), 1/sqrt(in)) weights otherwise; zero bias.
  static EncoderModel linear(Eigen::Index in_dim, Eigen::Index out_dim, std::uint64_t seed) {
    check_out_dim(out_dim);
    EncoderModel e;
    e.kind_ = EncoderKind::linear;
    e.in_dim_ = in_dim;
    e.out_dim_ = out_dim;
    if (in_dim == out_dim) {
      e.net_.weights = {Tensor::Identity(in_dim, out_dim)};
      e.net_.biases = {Tensor::Zero(1, out_dim)};
    } else {
      Rng rng(seed);
      const Eigen::Index widths[] = {in_dim, out_dim};
      e.net_ = Perceptron::create(widths, rng, false);
    }
    return e;
  }

  static EncoderModel mlp(Eigen::Index in_dim, Eigen::Index out_dim, std::uint64_t seed) {
    check_out_dim(out_dim);
    EncoderModel e;
    e.kind_ = EncoderKind::mlp;
    e.in_dim_ = in_dim;
    e.out_dim_ = out_dim;
    Rng rng(seed);
    const Eigen::Index widths[] = {in_dim, 2 * out_dim, out_dim};
    e.net_ = Perceptron::create(widths, rng, false);
    return e;
  }

  static EncoderModel create(EncoderKind kind, Eigen::Index in_dim, Eigen::Index out_dim,
                             std::uint64_t seed) {
    switch (kind) {
      case EncoderKind::identity:
        if (in_dim != out_dim) {
          throw std::invalid_argument("identity encoder requires in_dim == out_dim (" +
                                      std::to_string(in_dim) + " vs " +
                                      std::to_string(out_dim) + ")");
        }
        return identity(in_dim);
      case EncoderKind::linear: return linear(in_dim, out_dim, seed);
      case EncoderKind::mlp: return mlp(in_dim, out_dim, seed);
    }
    throw std::invalid_argument("unknown encoder kind");
  }

  /// Rebuilds an encoder from stored parameters (used by the model file reader).
  static EncoderModel from_parts(EncoderKind kind, Eigen::Index in_dim, Eigen::Index out_dim,
                                 Perceptron net, bool trainable) {
    EncoderModel e = kind == EncoderKind::identity ? identity(in_dim) : EncoderModel{};
    if (kind != EncoderKind::identity) {
      check_out_dim(out_dim);
      e.kind_ = kind;
      e.in_dim_ = in_dim;
      e.out_dim_ = out_dim;
      const std::size_t depth = kind == EncoderKind::linear ? 1 : 2;
      if (net.depth() != depth || net.in_dim() != in_dim || net.out_dim() != out_dim) {
        throw std::invalid_argument("encoder parameters do not match kind/dimensions");
      }
      e.net_ = std::move(net);
    }
    e.set_trainable(trainable);
    return e;
  }

  EncoderKind kind() const { return kind_; }
  Eigen::Index in_dim() const { return in_dim_; }
  Eigen::Index out_dim() const { return out_dim_; }
  bool trainable() const { return trainable_; }

  void set_trainable(bool on) {
    if (on && kind_ == EncoderKind::identity) {
      throw std::invalid_argument("identity encoder has no parameters to train");
    }
    trainable_ = on;
  }

  const Perceptron& network() const { return net_; }

  /// One sample per row.
  Tensor encode_batch(const Tensor& x) const {
    if (x.cols() != in_dim_) {
      throw std::invalid_argument("encode: input length " + std::to_string(x.cols()) +
                                  " does not match in_dim " + std::to_string(in_dim_));
    }
    if (kind_ == EncoderKind::identity) return x;
    return net_.forward(x);
  }

  Eigen::VectorXd encode(const Eigen::VectorXd& x) const {
    return encode_batch(x.transpose()).row(0).transpose();
  }

  std::vector<Tensor*> parameters() {
    return kind_ == EncoderKind::identity ? std::vector<Tensor*>{} : net_.parameters();
  }
  std::vector<const Tensor*> parameters() const {
    return kind_ == EncoderKind::identity ? std::vector<const Tensor*>{} : net_.parameters();
  }

 private:
  static void check_out_dim(Eigen::Index out_dim) {
    if (out_dim <= 0 || out_dim % 2 != 0) {
      throw std::invalid_argument("encoder out_dim must be positive and even, got " +
                                  std::to_string(out_dim));
    }
  }

  EncoderKind kind_ = EncoderKind::identity;
  Eigen::Index in_dim_ = 0;
  Eigen::Index out_dim_ = 0;
  bool trainable_ = false;
  Perceptron net_;
};

/// Records the encoder on a tape. For identity encoders the input node is returned.
inline NodeId taped_encode(Tape& tape, NodeId x, const EncoderModel& enc,
                           std::span<const NodeId> param_ids) {
  if (tape.value(x).cols() != enc.in_dim()) {
    throw std::invalid_argument("encode: input length " + std::to_string(tape.value(x).cols()) +
                                " does not match in_dim " + std::to_string(enc.in_dim()));
  }
  if (enc.kind() == EncoderKind::identity) return x;
  return taped_forward(tape, x, param_ids);
}

}  // namespace fpflow

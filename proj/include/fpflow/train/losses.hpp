// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/encoder.hpp"
#include "fpflow/flow/flow.hpp"

#include <stdexcept>
#include <vector>

namespace fpflow::train {

/// Tape leaves for one (encoder, flow) pair. Encoder leaves are constants
/// unless the encoder is trainable, so frozen encoders never receive gradients.
struct ModelBinding {
  std::vector<NodeId> encoder;
  std::vector<NodeId> flow;
};

inline ModelBinding bind(Tape& tape, const EncoderModel& enc, const flow::FlowModel& model) {
  const auto ep = enc.parameters();
  const auto fp = model.parameters();
  return {bind_parameters(tape, ep, enc.trainable()), bind_parameters(tape, fp, true)};
}

/// log p(E(x)) per row, (batch x 1).
inline NodeId batch_log_likelihood(Tape& tape, const Tensor& x, const EncoderModel& enc,
                                   const flow::FlowModel& model, const ModelBinding& b) {
  const NodeId in = tape.constant(x);
  const NodeId e = taped_encode(tape, in, enc, b.encoder);
  return flow::taped_log_likelihood(tape, e, model, b.flow);
}

/// -mean log p(E(x)) over a nonempty TP batch.
inline NodeId loss_tp(Tape& tape, const Tensor& tp_batch, const EncoderModel& enc,
                      const flow::FlowModel& model, const ModelBinding& b) {
  if (tp_batch.rows() == 0) throw std::invalid_argument("loss_tp: empty TP batch");
  return tape.scale(tape.mean(batch_log_likelihood(tape, tp_batch, enc, model, b)), -1.0);
}

/// mean max(0, log p(E(x)) - margin) over the FP batch; an exact zero for an
/// empty batch.
inline NodeId loss_fp(Tape& tape, const Tensor& fp_batch, const EncoderModel& enc,
                      const flow::FlowModel& model, const ModelBinding& b, double margin) {
  if (fp_batch.rows() == 0) return tape.constant(Tensor::Zero(1, 1));
  const NodeId logp = batch_log_likelihood(tape, fp_batch, enc, model, b);
  const NodeId shifted =
      tape.sub(logp, tape.constant(Tensor::Constant(fp_batch.rows(), 1, margin)));
  return tape.mean(tape.max_with(shifted, 0.0));
}

struct LossNodes {
  NodeId total;
  NodeId tp;
  NodeId fp;
  bool has_fp;
};

/// L_TP + L_FP with per-set means taken separately. With an empty FP batch the
/// total is the TP loss node itself.
inline LossNodes total_loss(Tape& tape, const Tensor& tp_batch, const Tensor& fp_batch,
                            const EncoderModel& enc, const flow::FlowModel& model,
                            const ModelBinding& b, double margin) {
  const NodeId tp = loss_tp(tape, tp_batch, enc, model, b);
  if (fp_batch.rows() == 0) return {tp, tp, tp, false};
  const NodeId fp = loss_fp(tape, fp_batch, enc, model, b, margin);
  return {tape.add(tp, fp), tp, fp, true};
}

}  // namespace fpflow::train

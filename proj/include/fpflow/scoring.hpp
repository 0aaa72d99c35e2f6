// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/encoder.hpp"
#include "fpflow/flow/flow.hpp"

#include <cmath>
#include <limits>

namespace fpflow {

/// log p(E(x)) per row. Non-finite entries mark scoring failures.
inline Eigen::VectorXd log_likelihoods(const Tensor& x, const EncoderModel& enc,
                                       const flow::FlowModel& model) {
  return flow::log_likelihood_batch(enc.encode_batch(x), model);
}

/// Anomaly score = -log p(E(x)); higher means more FP-like.
inline Eigen::VectorXd anomaly_scores(const Tensor& x, const EncoderModel& enc,
                                      const flow::FlowModel& model) {
  return -log_likelihoods(x, enc, model);
}

/// Rank-safe copy of scores: failed (NaN) entries become +inf so a sample that
/// could not be scored is treated as maximally anomalous. Returns the number
/// of replaced entries.
inline std::size_t sanitize_scores(std::vector<double>& scores) {
  std::size_t flagged = 0;
  for (double& s : scores) {
    if (std::isnan(s)) {
      s = std::numeric_limits<double>::infinity();
      ++flagged;
    }
  }
  return flagged;
}

}  // namespace fpflow

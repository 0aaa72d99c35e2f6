// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used only by the test suites.
#pragma once

#include "fpflow/eval/metrics.hpp"
#include "fpflow/flow/flow.hpp"
#include "fpflow/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <vector>

namespace oracle {

using fpflow::Label;
using fpflow::eval::ScoredSet;

/// Overwrites every parameter of a flow (including the zero-initialized
/// output maps) with U(-scale, scale) draws, so the flow is far from identity.
inline void randomize(fpflow::flow::FlowModel& model, std::uint64_t seed, double scale) {
  fpflow::Rng rng(seed);
  for (auto* p : model.parameters()) *p = fpflow::uniform_matrix(p->rows(), p->cols(), scale, rng);
}

inline fpflow::flow::FlowModel random_flow(Eigen::Index d, int layers, std::uint64_t seed,
                                           double scale = 0.3, Eigen::Index hidden = 0) {
  fpflow::flow::FlowConfig cfg;
  cfg.dim = d;
  cfg.layers = layers;
  cfg.hidden = hidden;
  cfg.seed = seed;
  auto m = fpflow::flow::FlowModel::create(cfg);
  randomize(m, seed + 17, scale);
  return m;
}

/// Central-difference Jacobian of f at x.
inline Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-5) {
  const Eigen::Index n = x.size();
  Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd j(f0.size(), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::VectorXd xp = x, xm = x;
    xp(c) += h;
    xm(c) -= h;
    j.col(c) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return j;
}

/// log|det J| via LU: sum of log|U_ii|.
inline double log_abs_det(const Eigen::MatrixXd& j) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(j);
  const Eigen::MatrixXd& u = lu.matrixLU();
  double s = 0.0;
  for (Eigen::Index i = 0; i < u.rows(); ++i) s += std::log(std::abs(u(i, i)));
  return s;
}

/// Central differences of a scalar function with respect to one tensor entry.
inline double fd_scalar(const std::function<double()>& f, double& entry, double h = 1e-5) {
  const double saved = entry;
  entry = saved + h;
  const double fp = f();
  entry = saved - h;
  const double fm = f();
  entry = saved;
  return (fp - fm) / (2.0 * h);
}

/// Relative-error check with an absolute floor for tiny gradients.
inline bool grad_close(double analytic, double numeric, double rel = 1e-4, double abs_tol = 1e-7) {
  const double diff = std::abs(analytic - numeric);
  if (std::max(std::abs(analytic), std::abs(numeric)) < 1e-3) return diff < abs_tol;
  return diff / std::max(std::abs(analytic), std::abs(numeric)) < rel;
}

// ---- metrics by enumeration ------------------------------------------------

inline std::vector<double> distinct_desc(const ScoredSet& s) {
  std::set<double, std::greater<>> v(s.scores.begin(), s.scores.end());
  return {v.begin(), v.end()};
}

/// Precision/recall with "reject iff score >= t" for every distinct score t.
inline double brute_ap(const ScoredSet& s) {
  double p_total = 0;
  for (auto l : s.labels) p_total += (l == Label::fp);
  double ap = 0.0, prev_r = 0.0;
  for (double t : distinct_desc(s)) {
    double tp = 0, pred = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s.scores[i] >= t) {
        pred += 1;
        tp += (s.labels[i] == Label::fp);
      }
    }
    const double r = tp / p_total;
    ap += (r - prev_r) * (tp / pred);
    prev_r = r;
  }
  return ap;
}

inline double pairwise_auc(const ScoredSet& s) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.labels[i] != Label::fp) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (s.labels[j] != Label::tp) continue;
      pairs += 1;
      if (s.scores[i] > s.scores[j]) wins += 1;
      else if (s.scores[i] == s.scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

inline double f1_at(const ScoredSet& s, double thr) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool rej = s.scores[i] > thr;
    if (s.labels[i] == Label::fp) (rej ? tp : fn) += 1;
    else if (rej) fp += 1;
  }
  return tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
}

/// Best F1 over every cut position of the sorted scores (cuts inside runs of
/// tied scores are not realizable and are skipped). Returns {f1, rejected count}.
inline std::pair<double, std::size_t> brute_best_f1(const ScoredSet& s) {
  std::vector<double> sorted = s.scores;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double best = -1.0;
  std::size_t best_k = 0;
  for (std::size_t k = 1; k <= sorted.size(); ++k) {
    if (k < sorted.size() && sorted[k] == sorted[k - 1]) continue;
    const double thr = k < sorted.size() ? sorted[k] : -std::numeric_limits<double>::infinity();
    // reject exactly the top-k scores
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool rej = s.scores[i] > thr;
      if (s.labels[i] == Label::fp) (rej ? tp : fn) += 1;
      else if (rej) fp += 1;
    }
    const double f1 = tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    if (f1 > best) {
      best = f1;
      best_k = k;
    }
  }
  return {best, best_k};
}

/// Random scored set; integer-valued scores when `ties` so duplicates occur.
inline ScoredSet random_set(fpflow::Rng& rng, std::size_t n, bool ties) {
  ScoredSet s;
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_int_distribution<int> ui(0, 9);
  std::bernoulli_distribution coin(0.4);
  for (std::size_t i = 0; i < n; ++i) {
    s.scores.push_back(ties ? double(ui(rng)) : u(rng));
    s.labels.push_back(coin(rng) ? Label::fp : Label::tp);
  }
  s.labels[0] = Label::fp;
  s.labels[1] = Label::tp;
  return s;
}

/// -log of the isotropic Gaussian KDE, summed term by term without log-sum-exp.
inline double kde_direct(const Eigen::MatrixXd& fit, const Eigen::VectorXd& x, double bw) {
  const double d = double(fit.cols());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < fit.rows(); ++i) {
    double sq = 0.0;
    for (Eigen::Index j = 0; j < fit.cols(); ++j) {
      const double diff = x(j) - fit(i, j);
      sq += diff * diff;
    }
    acc += std::exp(-0.5 * sq / (bw * bw)) / std::pow(2.0 * std::numbers::pi * bw * bw, d / 2.0);
  }
  return -std::log(acc / double(fit.rows()));
}

}  // namespace oracle

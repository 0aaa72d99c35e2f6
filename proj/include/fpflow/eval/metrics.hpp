// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/label.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpflow::eval {

/// Anomaly scores (higher = more FP-like) with ground-truth labels.
struct ScoredSet {
  std::vector<double> scores;
  std::vector<Label> labels;
  /// Class index per sample, -1 for TPs. May be empty.
  std::vector<int> fp_class;

  std::size_t size() const { return scores.size(); }
  std::size_t count(Label l) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l));
  }
  bool has_both_labels() const { return count(Label::tp) > 0 && count(Label::fp) > 0; }
};

namespace detail {

inline void check_set(const ScoredSet& s, const char* what, bool need_both = true) {
  if (s.scores.size() != s.labels.size()) {
    throw std::invalid_argument(std::string(what) + ": scores and labels differ in length");
  }
  if (!s.fp_class.empty() && s.fp_class.size() != s.scores.size()) {
    throw std::invalid_argument(std::string(what) + ": fp_class length mismatch");
  }
  for (double v : s.scores) {
    if (std::isnan(v)) throw std::invalid_argument(std::string(what) + ": NaN score");
  }
  if (need_both && !s.has_both_labels()) {
    throw std::invalid_argument(std::string(what) + ": both TP and FP samples are required");
  }
}

/// Groups of tied scores in descending order: (score, fp_count, tp_count).
struct ScoreGroup {
  double score;
  std::size_t fp;
  std::size_t tp;
};

inline std::vector<ScoreGroup> descending_groups(const ScoredSet& s) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.scores[a] > s.scores[b]; });
  std::vector<ScoreGroup> groups;
  for (std::size_t i : order) {
    if (groups.empty() || groups.back().score != s.scores[i]) {
      groups.push_back({s.scores[i], 0, 0});
    }
    (s.labels[i] == Label::fp ? groups.back().fp : groups.back().tp) += 1;
  }
  return groups;
}

}  // namespace detail

/// AP = sum_k (R_k - R_{k-1}) P_k over descending distinct-score thresholds,
/// FP as the positive class.
inline double average_precision(const ScoredSet& s) {
  detail::check_set(s, "average_precision");
  const double positives = double(s.count(Label::fp));
  double ap = 0.0;
  double prev_recall = 0.0;
  std::size_t fp_seen = 0, seen = 0;
  for (const auto& g : detail::descending_groups(s)) {
    fp_seen += g.fp;
    seen += g.fp + g.tp;
    const double recall = double(fp_seen) / positives;
    const double precision = double(fp_seen) / double(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

/// Probability that a random FP outscores a random TP, ties counted 1/2.
inline double roc_auc(const ScoredSet& s) {
  detail::check_set(s, "roc_auc");
  auto groups = detail::descending_groups(s);
  // Walk ascending so tp_below counts strictly lower TP scores.
  double wins = 0.0;
  std::size_t tp_below = 0;
  for (auto it = groups.rbegin(); it != groups.rend(); ++it) {
    wins += double(it->fp) * double(tp_below) + 0.5 * double(it->fp) * double(it->tp);
    tp_below += it->tp;
  }
  return wins / (double(s.count(Label::fp)) * double(s.count(Label::tp)));
}

struct PrPoint {
  double threshold;  // samples with score >= threshold are rejected
  double precision;
  double recall;
};

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

inline std::vector<PrPoint> pr_curve(const ScoredSet& s) {
  detail::check_set(s, "pr_curve");
  const double positives = double(s.count(Label::fp));
  std::vector<PrPoint> out;
  std::size_t fp_seen = 0, seen = 0;
  for (const auto& g : detail::descending_groups(s)) {
    fp_seen += g.fp;
    seen += g.fp + g.tp;
    out.push_back({g.score, double(fp_seen) / double(seen), double(fp_seen) / positives});
  }
  return out;
}

/// Starts at (0, 0); fpr counts rejected TPs, tpr rejected FPs.
inline std::vector<RocPoint> roc_curve(const ScoredSet& s) {
  detail::check_set(s, "roc_curve");
  const double nfp = double(s.count(Label::fp));
  const double ntp = double(s.count(Label::tp));
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  std::size_t fp_seen = 0, tp_seen = 0;
  for (const auto& g : detail::descending_groups(s)) {
    fp_seen += g.fp;
    tp_seen += g.tp;
    out.push_back({g.score, double(tp_seen) / ntp, double(fp_seen) / nfp});
  }
  return out;
}

struct ThresholdChoice {
  /// Decision rule: reject iff score > threshold.
  double threshold = 0.0;
  double f1 = 0.0;
};

/// Scans every PR operating point and returns the F1-maximizing cut for the
/// FP class. Ties go to the higher threshold (fewer rejections). The returned
/// threshold lies between the last rejected score and the next lower one.
inline ThresholdChoice select_threshold_f1(const ScoredSet& s) {
  detail::check_set(s, "select_threshold_f1");
  const double positives = double(s.count(Label::fp));
  const auto groups = detail::descending_groups(s);
  ThresholdChoice best{0.0, -1.0};
  std::size_t fp_seen = 0, seen = 0;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    fp_seen += groups[k].fp;
    seen += groups[k].fp + groups[k].tp;
    const double f1 = 2.0 * double(fp_seen) / (double(seen) + positives);
    if (f1 > best.f1) {
      double thr;
      if (k + 1 < groups.size()) {
        const double hi = groups[k].score, lo = groups[k + 1].score;
        thr = lo + 0.5 * (hi - lo);
        if (!(thr < hi) || !std::isfinite(thr)) thr = lo;
      } else {
        thr = groups[k].score - 1.0;
      }
      best = {thr, f1};
    }
  }
  return best;
}

struct ConfusionMetrics {
  // Counts with FP as the positive (rejected) class.
  std::size_t rejected_fp = 0;
  std::size_t rejected_tp = 0;
  std::size_t kept_fp = 0;
  std::size_t kept_tp = 0;
  // Empty when the denominator is zero.
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

/// Reject iff score > threshold.
inline ConfusionMetrics confusion_metrics(const ScoredSet& s, double threshold) {
  detail::check_set(s, "confusion_metrics", false);
  if (!std::isfinite(threshold)) {
    throw std::invalid_argument("confusion_metrics: threshold must be finite");
  }
  ConfusionMetrics c;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const bool reject = s.scores[i] > threshold;
    if (s.labels[i] == Label::fp) {
      (reject ? c.rejected_fp : c.kept_fp) += 1;
    } else {
      (reject ? c.rejected_tp : c.kept_tp) += 1;
    }
  }
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return double(num) / double(den);
  };
  c.accuracy = ratio(c.rejected_fp + c.kept_tp, s.size());
  c.precision = ratio(c.rejected_fp, c.rejected_fp + c.rejected_tp);
  c.sensitivity = ratio(c.rejected_fp, c.rejected_fp + c.kept_fp);
  c.specificity = ratio(c.kept_tp, c.kept_tp + c.rejected_tp);
  return c;
}

/// Per-label counts of scores over equal-width bins spanning [lo, hi].
struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> tp;
  std::vector<std::size_t> fp;
};

/// Infinite scores are clamped into the end bins.
inline Histogram score_histogram(const ScoredSet& s, std::size_t bins) {
  detail::check_set(s, "score_histogram", false);
  if (bins == 0) throw std::invalid_argument("score_histogram: bins must be >= 1");
  Histogram h;
  h.tp.assign(bins, 0);
  h.fp.assign(bins, 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : s.scores) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!std::isfinite(lo)) lo = hi = 0.0;
  h.lo = lo;
  h.hi = hi;
  const double width = hi > lo ? (hi - lo) / double(bins) : 1.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double pos = (s.scores[i] - lo) / width;
    std::size_t b = 0;
    if (pos >= double(bins)) {
      b = bins - 1;
    } else if (pos > 0.0) {
      b = std::min(bins - 1, std::size_t(pos));
    }
    (s.labels[i] == Label::fp ? h.fp : h.tp)[b] += 1;
  }
  return h;
}

}  // namespace fpflow::eval

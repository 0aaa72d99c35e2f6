// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/baselines.hpp"
#include "fpflow/data/dataset.hpp"
#include "fpflow/encoder.hpp"
#include "fpflow/errors.hpp"
#include "fpflow/eval/kfold.hpp"
#include "fpflow/eval/metrics.hpp"
#include "fpflow/flow/flow.hpp"
#include "fpflow/scoring.hpp"
#include "fpflow/train/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace fpflow::eval {

enum class ExperimentKind { comparative, data_efficiency, class_robustness };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::comparative: return "comparative";
    case ExperimentKind::data_efficiency: return "data_efficiency";
    case ExperimentKind::class_robustness: return "class_robustness";
  }
  return "?";
}

inline std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) {
  if (s == "comparative") return ExperimentKind::comparative;
  if (s == "data_efficiency" || s == "data-efficiency") return ExperimentKind::data_efficiency;
  if (s == "class_robustness" || s == "class-robustness") return ExperimentKind::class_robustness;
  return std::nullopt;
}

enum class ScorerId { flow_mle, flow_frozen, flow_finetune, kde, pca, gaussian };

inline std::string_view to_string(ScorerId s) {
  switch (s) {
    case ScorerId::flow_mle: return "flow_mle";
    case ScorerId::flow_frozen: return "flow_frozen";
    case ScorerId::flow_finetune: return "flow_finetune";
    case ScorerId::kde: return "kde";
    case ScorerId::pca: return "pca";
    case ScorerId::gaussian: return "gaussian";
  }
  return "?";
}

inline std::optional<ScorerId> parse_scorer(std::string_view s) {
  for (auto id : {ScorerId::flow_mle, ScorerId::flow_frozen, ScorerId::flow_finetune, ScorerId::kde,
                  ScorerId::pca, ScorerId::gaussian}) {
    if (s == to_string(id)) return id;
  }
  return std::nullopt;
}

inline bool is_flow(ScorerId s) {
  return s == ScorerId::flow_mle || s == ScorerId::flow_frozen || s == ScorerId::flow_finetune;
}

inline bool uses_fps(ScorerId s) { return s == ScorerId::flow_frozen || s == ScorerId::flow_finetune; }

inline train::Variant variant_of(ScorerId s) {
  switch (s) {
    case ScorerId::flow_frozen: return train::Variant::frozen;
    case ScorerId::flow_finetune: return train::Variant::finetune;
    default: return train::Variant::mle;
  }
}

inline std::vector<double> default_ratios() {
  return {0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::comparative;
  /// Empty selects the default scorer set of the experiment kind.
  std::vector<ScorerId> scorers;
  int folds = 5;
  double val_fraction = 0.1;
  /// Downsample the majority label of each test fold (comparative and data
  /// efficiency only).
  bool balance_test = true;
  std::uint64_t seed = 0;

  EncoderKind encoder = EncoderKind::identity;
  /// 0 keeps the input dimension.
  Eigen::Index encoder_out = 0;
  int flow_layers = 8;
  Eigen::Index flow_hidden = 0;
  int mlp_hidden_layers = 1;
  double s_max = 2.0;
  train::TrainConfig train = default_train();

  baselines::BaselineConfig baseline;
  std::vector<double> ratios = default_ratios();
  std::size_t histogram_bins = 40;
  /// Worker threads for independent (fold, scorer) runs. Results do not
  /// depend on this value.
  int jobs = 1;

  /// Training defaults with a shorter epoch budget; each experiment trains
  /// one model per fold, scorer and ratio/class.
  static train::TrainConfig default_train() {
    train::TrainConfig t;
    t.epochs = 40;
    return t;
  }

  std::vector<ScorerId> resolved_scorers() const {
    if (!scorers.empty()) return scorers;
    switch (kind) {
      case ExperimentKind::comparative:
        return {ScorerId::flow_mle, ScorerId::kde, ScorerId::pca, ScorerId::gaussian};
      case ExperimentKind::data_efficiency:
        return {ScorerId::flow_mle, ScorerId::flow_frozen, ScorerId::flow_finetune};
      case ExperimentKind::class_robustness:
        return {ScorerId::flow_mle, ScorerId::flow_frozen, ScorerId::flow_finetune};
    }
    return {};
  }
};

struct RunResult {
  ScorerId scorer = ScorerId::flow_mle;
  int fold = 0;
  /// Exposed FP fraction (data efficiency); 0 marks FP-free reference rows.
  std::optional<double> ratio;
  std::optional<std::string> held_out_class;
  double ap = 0.0;
  double auc = 0.0;
  ThresholdChoice threshold;
  ConfusionMetrics confusion;
  std::size_t n_train_tp = 0, n_train_fp = 0, n_test_tp = 0, n_test_fp = 0;
  /// Test scores that could not be computed and were ranked as +inf.
  std::size_t flagged_scores = 0;
  std::vector<PrPoint> pr;
  std::vector<RocPoint> roc;
  Histogram histogram;
  std::optional<int> best_epoch;
  std::optional<double> margin;
  std::optional<train::TrainTrace> trace;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::comparative;
  ExperimentConfig config;
  std::size_t n_samples = 0;
  Eigen::Index d_in = 0;
  std::vector<std::string> class_names;
  std::string provenance;
  std::vector<RunResult> runs;
  std::vector<std::string> notices;
};

namespace detail {

struct Task {
  ScorerId scorer;
  int fold;
  std::vector<std::size_t> train_tp, train_fp, val, test;
  std::optional<double> ratio;
  std::optional<std::string> held_out_class;
};

inline Tensor rows_of(const data::Dataset& ds, const std::vector<std::size_t>& idx) { return ds.features(idx); }

inline std::vector<Label> labels_of(const data::Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<Label> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(ds.samples()[i].label);
  return out;
}

/// Seeds depend only on the fold so that variants and ratios of one fold start
/// from the same encoder and flow initialization.
inline RunResult run_task(const data::Dataset& ds, const ExperimentConfig& cfg, const Task& t) {
  RunResult r;
  r.scorer = t.scorer;
  r.fold = t.fold;
  r.ratio = t.ratio;
  r.held_out_class = t.held_out_class;
  r.n_train_tp = t.train_tp.size();
  r.n_train_fp = t.train_fp.size();

  const Tensor test_x = rows_of(ds, t.test);
  Eigen::VectorXd scores;
  if (is_flow(t.scorer)) {
    const Eigen::Index out_dim = cfg.encoder_out > 0 ? cfg.encoder_out : ds.d_in();
    const auto fold_tag = std::uint64_t(t.fold);
    EncoderModel enc =
        EncoderModel::create(cfg.encoder, ds.d_in(), out_dim, derive_seed(cfg.seed, {10, fold_tag}));
    flow::FlowConfig fc;
    fc.dim = out_dim;
    fc.layers = cfg.flow_layers;
    fc.hidden = cfg.flow_hidden;
    fc.mlp_hidden_layers = cfg.mlp_hidden_layers;
    fc.s_max = cfg.s_max;
    fc.seed = derive_seed(cfg.seed, {11, fold_tag});
    train::TrainData data;
    data.tp = train::FeatureRows(rows_of(ds, t.train_tp));
    if (uses_fps(t.scorer)) data.fp = train::FeatureRows(rows_of(ds, t.train_fp));
    data.val_x = rows_of(ds, t.val);
    data.val_labels = labels_of(ds, t.val);
    train::TrainConfig tc = cfg.train;
    tc.variant = variant_of(t.scorer);
    tc.seed = derive_seed(cfg.seed, {12, fold_tag});
    auto result = train::train(data, std::move(enc), flow::FlowModel::create(fc), tc);
    scores = anomaly_scores(test_x, result.encoder, result.flow);
    r.best_epoch = result.best_epoch;
    if (std::isfinite(result.margin)) r.margin = result.margin;
    r.trace = std::move(result.trace);
  } else {
    baselines::BaselineConfig bc = cfg.baseline;
    bc.kind = t.scorer == ScorerId::kde ? baselines::Kind::kde
              : t.scorer == ScorerId::pca ? baselines::Kind::pca
                                          : baselines::Kind::gaussian;
    const auto model = baselines::fit_baseline(bc, rows_of(ds, t.train_tp));
    scores = baselines::score_baseline(model, test_x);
  }

  ScoredSet set;
  set.scores.assign(scores.data(), scores.data() + scores.size());
  set.labels = labels_of(ds, t.test);
  r.flagged_scores = sanitize_scores(set.scores);
  r.n_test_tp = set.count(Label::tp);
  r.n_test_fp = set.count(Label::fp);
  r.ap = average_precision(set);
  r.auc = roc_auc(set);
  r.threshold = select_threshold_f1(set);
  if (std::isfinite(r.threshold.threshold)) r.confusion = confusion_metrics(set, r.threshold.threshold);
  r.pr = pr_curve(set);
  r.roc = roc_curve(set);
  r.histogram = score_histogram(set, cfg.histogram_bins);
  return r;
}

/// Runs tasks on up to `jobs` threads; results keep task order.
inline std::vector<RunResult> run_all(const data::Dataset& ds, const ExperimentConfig& cfg,
                                      const std::vector<Task>& tasks,
                                      const std::function<void(const std::string&)>& progress) {
  std::vector<std::optional<RunResult>> out(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      try {
        out[i] = run_task(ds, cfg, tasks[i]);
        if (progress) {
          std::lock_guard lock(mu);
          const auto& t = tasks[i];
          std::string msg = std::string(to_string(t.scorer)) + " fold " + std::to_string(t.fold);
          if (t.ratio) msg += " ratio " + std::to_string(*t.ratio);
          if (t.held_out_class) msg += " held-out " + *t.held_out_class;
          progress(msg + ": AP " + std::to_string(out[i]->ap) + " AUC " + std::to_string(out[i]->auc));
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<RunResult> results;
  results.reserve(out.size());
  for (auto& r : out) results.push_back(std::move(*r));
  return results;
}

inline void split_by_label(const data::Dataset& ds, const std::vector<std::size_t>& idx,
                           std::vector<std::size_t>& tp, std::vector<std::size_t>& fp) {
  for (std::size_t i : idx) (ds.samples()[i].label == Label::tp ? tp : fp).push_back(i);
}

inline ExperimentReport make_report(const data::Dataset& ds, const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.kind = cfg.kind;
  rep.config = cfg;
  rep.n_samples = ds.size();
  rep.d_in = ds.d_in();
  rep.class_names = ds.class_names();
  rep.provenance = ds.provenance();
  return rep;
}

inline void check_common(const data::Dataset& ds, const ExperimentConfig& cfg) {
  if (ds.count(Label::tp) == 0 || ds.count(Label::fp) == 0) {
    throw DataError("experiment: dataset needs both TP and FP samples for evaluation");
  }
  if (cfg.histogram_bins == 0) throw ConfigError("experiment: histogram_bins must be >= 1");
}

}  // namespace detail

using Progress = std::function<void(const std::string&)>;

/// Every scorer is fitted on the TPs of each training split; test folds are
/// label-balanced when configured.
inline ExperimentReport run_comparative(const data::Dataset& input, const ExperimentConfig& cfg,
                                        const Progress& progress = {}) {
  const data::Dataset ds = input.canonical();
  detail::check_common(ds, cfg);
  const auto scorers = cfg.resolved_scorers();
  for (auto s : scorers) {
    if (uses_fps(s)) {
      throw ConfigError("comparative: scorer '" + std::string(to_string(s)) +
                        "' trains on FPs; the comparative protocol is TP-only");
    }
  }
  auto rep = detail::make_report(ds, cfg);
  std::vector<detail::Task> tasks;
  for (const auto& split : kfold_split(ds, cfg.folds, cfg.val_fraction, cfg.seed)) {
    std::vector<std::size_t> tp, fp;
    detail::split_by_label(ds, split.train, tp, fp);
    const auto test = cfg.balance_test
                          ? balance_labels(ds, split.test, derive_seed(cfg.seed, {20, std::uint64_t(split.fold)}))
                          : split.test;
    for (auto s : scorers) tasks.push_back({s, split.fold, tp, {}, split.val, test, std::nullopt, std::nullopt});
  }
  rep.runs = detail::run_all(ds, cfg, tasks, progress);
  return rep;
}

/// Nested FP subsample of the training FPs: ratio r exposes the first
/// floor(r * n) entries of one seeded permutation per fold.
inline std::vector<std::size_t> nested_subsample(const std::vector<std::size_t>& fps, double ratio,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> order = fps;
  Rng rng(seed);
  shuffle_in_place(order, rng);
  const auto n = std::size_t(std::floor(ratio * double(order.size()) + 1e-9));
  order.resize(std::min(n, order.size()));
  std::sort(order.begin(), order.end());
  return order;
}

/// FP-using scorers are trained at every ratio; FP-free scorers are run once
/// per fold and reported with ratio 0 as the reference.
inline ExperimentReport run_data_efficiency(const data::Dataset& input, const ExperimentConfig& cfg,
                                            const Progress& progress = {}) {
  const data::Dataset ds = input.canonical();
  detail::check_common(ds, cfg);
  for (double r : cfg.ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ConfigError("data_efficiency: ratios must lie in (0, 1]");
  }
  auto rep = detail::make_report(ds, cfg);
  const auto scorers = cfg.resolved_scorers();
  std::vector<detail::Task> tasks;
  for (const auto& split : kfold_split(ds, cfg.folds, cfg.val_fraction, cfg.seed)) {
    std::vector<std::size_t> tp, fp;
    detail::split_by_label(ds, split.train, tp, fp);
    const auto fold_tag = std::uint64_t(split.fold);
    const auto test =
        cfg.balance_test ? balance_labels(ds, split.test, derive_seed(cfg.seed, {20, fold_tag})) : split.test;
    for (auto s : scorers) {
      if (!uses_fps(s)) {
        tasks.push_back({s, split.fold, tp, {}, split.val, test, 0.0, std::nullopt});
        continue;
      }
      for (double r : cfg.ratios) {
        auto sub = nested_subsample(fp, r, derive_seed(cfg.seed, {21, fold_tag}));
        if (sub.empty()) {
          rep.notices.push_back("fold " + std::to_string(split.fold) + ": ratio " + std::to_string(r) +
                                " selects no FPs for " + std::string(to_string(s)) + "; skipped");
          continue;
        }
        tasks.push_back({s, split.fold, tp, std::move(sub), split.val, test, r, std::nullopt});
      }
    }
  }
  rep.runs = detail::run_all(ds, cfg, tasks, progress);
  return rep;
}

/// Leave-one-class-out: for each FP class c, train on TPs and the FPs of the
/// other classes; validation and test hold TPs and class-c FPs only.
inline ExperimentReport run_class_robustness(const data::Dataset& input, const ExperimentConfig& cfg,
                                             const Progress& progress = {}) {
  const data::Dataset ds = input.canonical();
  detail::check_common(ds, cfg);
  if (ds.class_names().size() < 2) throw DataError("class_robustness: at least 2 FP classes are required");
  auto rep = detail::make_report(ds, cfg);
  const auto scorers = cfg.resolved_scorers();
  std::vector<detail::Task> tasks;
  const auto splits = kfold_split(ds, cfg.folds, cfg.val_fraction, cfg.seed);
  for (std::size_t c = 0; c < ds.class_names().size(); ++c) {
    const auto in_class = [&](std::size_t i) {
      const auto& s = ds.samples()[i];
      return s.label == Label::fp && s.fp_class == int(c);
    };
    for (const auto& split : splits) {
      std::vector<std::size_t> tp, fp, val, test;
      for (std::size_t i : split.train) {
        const auto& s = ds.samples()[i];
        if (s.label == Label::tp) tp.push_back(i);
        else if (!in_class(i)) fp.push_back(i);
      }
      for (std::size_t i : split.val)
        if (ds.samples()[i].label == Label::tp || in_class(i)) val.push_back(i);
      for (std::size_t i : split.test)
        if (ds.samples()[i].label == Label::tp || in_class(i)) test.push_back(i);
      if (std::none_of(test.begin(), test.end(), in_class)) {
        throw DataError("class_robustness: class '" + ds.class_names()[c] + "' has no test members in fold " +
                        std::to_string(split.fold));
      }
      for (auto s : scorers) tasks.push_back({s, split.fold, tp, fp, val, test, std::nullopt, ds.class_names()[c]});
    }
  }
  rep.runs = detail::run_all(ds, cfg, tasks, progress);
  return rep;
}

inline ExperimentReport run_experiment(const data::Dataset& ds, const ExperimentConfig& cfg,
                                       const Progress& progress = {}) {
  switch (cfg.kind) {
    case ExperimentKind::comparative: return run_comparative(ds, cfg, progress);
    case ExperimentKind::data_efficiency: return run_data_efficiency(ds, cfg, progress);
    case ExperimentKind::class_robustness: return run_class_robustness(ds, cfg, progress);
  }
  throw ConfigError("unknown experiment kind");
}

// ---- aggregation -------------------------------------------------------------

struct Stat {
  double mean = std::numeric_limits<double>::quiet_NaN();
  /// Population standard deviation across folds.
  double std = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

inline Stat stat_of(const std::vector<double>& v) {
  Stat s;
  s.n = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / double(v.size());
  double sq = 0.0;
  for (double x : v) sq += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(sq / double(v.size()));
  return s;
}

struct SummaryRow {
  ScorerId scorer = ScorerId::flow_mle;
  std::optional<double> ratio;
  /// Held-out class, or "macro" for the unweighted mean over classes.
  std::optional<std::string> held_out_class;
  Stat ap, auc, accuracy, precision, sensitivity, specificity;
};

/// One row per (scorer, ratio, held-out class), in order of first appearance
/// of the key in the run list; class robustness adds one macro row per scorer.
inline std::vector<SummaryRow> summarize(const ExperimentReport& rep) {
  std::vector<SummaryRow> rows;
  std::vector<std::vector<const RunResult*>> members;
  for (const auto& r : rep.runs) {
    std::size_t k = 0;
    for (; k < rows.size(); ++k) {
      if (rows[k].scorer == r.scorer && rows[k].ratio == r.ratio && rows[k].held_out_class == r.held_out_class) break;
    }
    if (k == rows.size()) {
      rows.push_back({r.scorer, r.ratio, r.held_out_class, {}, {}, {}, {}, {}, {}});
      members.emplace_back();
    }
    members[k].push_back(&r);
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto collect = [&](auto get) {
      std::vector<double> v;
      for (const RunResult* r : members[k]) {
        const std::optional<double> x = get(*r);
        if (x) v.push_back(*x);
      }
      return stat_of(v);
    };
    rows[k].ap = collect([](const RunResult& r) { return std::optional<double>(r.ap); });
    rows[k].auc = collect([](const RunResult& r) { return std::optional<double>(r.auc); });
    rows[k].accuracy = collect([](const RunResult& r) { return r.confusion.accuracy; });
    rows[k].precision = collect([](const RunResult& r) { return r.confusion.precision; });
    rows[k].sensitivity = collect([](const RunResult& r) { return r.confusion.sensitivity; });
    rows[k].specificity = collect([](const RunResult& r) { return r.confusion.specificity; });
  }
  if (rep.kind == ExperimentKind::class_robustness) {
    std::vector<SummaryRow> with_macro;
    for (auto s : rep.config.resolved_scorers()) {
      std::vector<double> ap, auc;
      for (const auto& row : rows) {
        if (row.scorer != s) continue;
        with_macro.push_back(row);
        ap.push_back(row.ap.mean);
        auc.push_back(row.auc.mean);
      }
      if (ap.empty()) continue;
      SummaryRow macro;
      macro.scorer = s;
      macro.held_out_class = "macro";
      macro.ap = stat_of(ap);
      macro.auc = stat_of(auc);
      with_macro.push_back(macro);
    }
    return with_macro;
  }
  return rows;
}

/// Fold-mean lookup helper for acceptance checks and reports.
inline std::optional<SummaryRow> find_row(const std::vector<SummaryRow>& rows, ScorerId s,
                                          std::optional<double> ratio = std::nullopt,
                                          std::optional<std::string> cls = std::nullopt) {
  for (const auto& r : rows) {
    if (r.scorer != s) continue;
    if (ratio && (!r.ratio || std::abs(*r.ratio - *ratio) > 1e-12)) continue;
    if (cls && r.held_out_class != cls) continue;
    return r;
  }
  return std::nullopt;
}

}  // namespace fpflow::eval

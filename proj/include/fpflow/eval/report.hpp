// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fpflow/binary.hpp"
#include "fpflow/eval/experiments.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

namespace fpflow::eval {

inline constexpr int kReportSchemaVersion = 1;

// ---- config <-> JSON ---------------------------------------------------------

inline nlohmann::json to_json(const ExperimentConfig& c) {
  using nlohmann::json;
  json scorers = json::array();
  for (auto s : c.resolved_scorers()) scorers.push_back(std::string(to_string(s)));
  json bw = c.baseline.bandwidth ? json(*c.baseline.bandwidth) : json(nullptr);
  return {
      {"experiment", std::string(to_string(c.kind))},
      {"scorers", scorers},
      {"folds", c.folds},
      {"val_fraction", c.val_fraction},
      {"balance_test", c.balance_test},
      {"seed", c.seed},
      {"encoder", {{"kind", std::string(to_string(c.encoder))}, {"out_dim", c.encoder_out}}},
      {"flow",
       {{"layers", c.flow_layers}, {"hidden", c.flow_hidden}, {"mlp_hidden_layers", c.mlp_hidden_layers},
        {"s_max", c.s_max}}},
      {"train",
       {{"epochs", c.train.epochs},
        {"lr", c.train.lr},
        {"weight_decay", c.train.weight_decay},
        {"beta1", c.train.beta1},
        {"beta2", c.train.beta2},
        {"eps", c.train.eps_adam},
        {"batch_tp", c.train.batch_tp},
        {"batch_fp", c.train.batch_fp},
        {"margin_mode", c.train.margin_mode == train::MarginMode::adaptive ? "adaptive" : "fixed"},
        {"margin_value", c.train.margin_value}}},
      {"baseline", {{"kde_bandwidth", bw}, {"pca_k", c.baseline.pca_k}, {"shrinkage", c.baseline.shrinkage}}},
      {"ratios", c.ratios},
      {"histogram_bins", c.histogram_bins},
      {"jobs", c.jobs},
  };
}

/// Missing keys keep the values already in `c`.
inline ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c = {}) {
  try {
    if (j.contains("experiment")) {
      const auto k = parse_experiment_kind(j.at("experiment").get<std::string>());
      if (!k) throw ConfigError("config: unknown experiment '" + j.at("experiment").get<std::string>() + "'");
      c.kind = *k;
    }
    if (j.contains("scorers")) {
      c.scorers.clear();
      for (const auto& s : j.at("scorers")) {
        const auto id = parse_scorer(s.get<std::string>());
        if (!id) throw ConfigError("config: unknown scorer '" + s.get<std::string>() + "'");
        c.scorers.push_back(*id);
      }
    }
    c.folds = j.value("folds", c.folds);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.balance_test = j.value("balance_test", c.balance_test);
    c.seed = j.value("seed", c.seed);
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      if (e.contains("kind")) {
        const auto k = parse_encoder_kind(e.at("kind").get<std::string>());
        if (!k) throw ConfigError("config: unknown encoder kind");
        c.encoder = *k;
      }
      c.encoder_out = e.value("out_dim", c.encoder_out);
    }
    if (j.contains("flow")) {
      const auto& f = j.at("flow");
      c.flow_layers = f.value("layers", c.flow_layers);
      c.flow_hidden = f.value("hidden", c.flow_hidden);
      c.mlp_hidden_layers = f.value("mlp_hidden_layers", c.mlp_hidden_layers);
      c.s_max = f.value("s_max", c.s_max);
    }
    if (j.contains("train")) {
      const auto& t = j.at("train");
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.lr = t.value("lr", c.train.lr);
      c.train.weight_decay = t.value("weight_decay", c.train.weight_decay);
      c.train.beta1 = t.value("beta1", c.train.beta1);
      c.train.beta2 = t.value("beta2", c.train.beta2);
      c.train.eps_adam = t.value("eps", c.train.eps_adam);
      c.train.batch_tp = t.value("batch_tp", c.train.batch_tp);
      c.train.batch_fp = t.value("batch_fp", c.train.batch_fp);
      if (t.contains("margin_mode")) {
        const auto m = t.at("margin_mode").get<std::string>();
        if (m == "adaptive") c.train.margin_mode = train::MarginMode::adaptive;
        else if (m == "fixed") c.train.margin_mode = train::MarginMode::fixed;
        else throw ConfigError("config: margin_mode must be adaptive or fixed");
      }
      c.train.margin_value = t.value("margin_value", c.train.margin_value);
    }
    if (j.contains("baseline")) {
      const auto& b = j.at("baseline");
      if (b.contains("kde_bandwidth")) {
        if (b.at("kde_bandwidth").is_null()) c.baseline.bandwidth.reset();
        else c.baseline.bandwidth = b.at("kde_bandwidth").get<double>();
      }
      c.baseline.pca_k = b.value("pca_k", c.baseline.pca_k);
      c.baseline.shrinkage = b.value("shrinkage", c.baseline.shrinkage);
    }
    c.ratios = j.value("ratios", c.ratios);
    c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
    c.jobs = j.value("jobs", c.jobs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.folds < 2) throw ConfigError("config: folds must be >= 2");
  if (c.flow_layers < 0) throw ConfigError("config: flow.layers must be >= 0");
  if (c.jobs < 1) throw ConfigError("config: jobs must be >= 1");
  return c;
}

// ---- report files --------------------------------------------------------------

namespace detail {

inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline nlohmann::json opt(const std::optional<double>& v) { return v ? num(*v) : nlohmann::json(nullptr); }

inline std::string fixed(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string g17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string ratio_text(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

}  // namespace detail

/// File-name stem of a run, e.g. "flow_finetune_r0.05_fold2".
inline std::string run_tag(const RunResult& r) {
  std::string tag(to_string(r.scorer));
  if (r.ratio) tag += "_r" + detail::ratio_text(*r.ratio);
  if (r.held_out_class) tag += "_c" + *r.held_out_class;
  return tag + "_fold" + std::to_string(r.fold);
}

inline nlohmann::json stat_json(const Stat& s) {
  return {{"mean", detail::num(s.mean)}, {"std", detail::num(s.std)}, {"n", s.n}};
}

inline nlohmann::json to_json(const ExperimentReport& rep) {
  using nlohmann::json;
  json runs = json::array();
  for (const auto& r : rep.runs) {
    const auto tag = run_tag(r);
    json hist = {{"lo", detail::num(r.histogram.lo)},
                 {"hi", detail::num(r.histogram.hi)},
                 {"tp", r.histogram.tp},
                 {"fp", r.histogram.fp}};
    runs.push_back({
        {"scorer", std::string(to_string(r.scorer))},
        {"fold", r.fold},
        {"ratio", detail::opt(r.ratio)},
        {"held_out_class", r.held_out_class ? json(*r.held_out_class) : json(nullptr)},
        {"ap", r.ap},
        {"auc", r.auc},
        {"threshold", detail::num(r.threshold.threshold)},
        {"f1", r.threshold.f1},
        {"accuracy", detail::opt(r.confusion.accuracy)},
        {"precision", detail::opt(r.confusion.precision)},
        {"sensitivity", detail::opt(r.confusion.sensitivity)},
        {"specificity", detail::opt(r.confusion.specificity)},
        {"n_train_tp", r.n_train_tp},
        {"n_train_fp", r.n_train_fp},
        {"n_test_tp", r.n_test_tp},
        {"n_test_fp", r.n_test_fp},
        {"flagged_scores", r.flagged_scores},
        {"best_epoch", r.best_epoch ? json(*r.best_epoch) : json(nullptr)},
        {"margin", detail::opt(r.margin)},
        {"nll_histogram", hist},
        {"pr_curve_file", "curves/" + tag + "_pr.csv"},
        {"roc_curve_file", "curves/" + tag + "_roc.csv"},
    });
  }
  json summary = json::array();
  for (const auto& s : summarize(rep)) {
    summary.push_back({
        {"scorer", std::string(to_string(s.scorer))},
        {"ratio", detail::opt(s.ratio)},
        {"held_out_class", s.held_out_class ? json(*s.held_out_class) : json(nullptr)},
        {"ap", stat_json(s.ap)},
        {"auc", stat_json(s.auc)},
        {"accuracy", stat_json(s.accuracy)},
        {"precision", stat_json(s.precision)},
        {"sensitivity", stat_json(s.sensitivity)},
        {"specificity", stat_json(s.specificity)},
    });
  }
  return {
      {"schema_version", kReportSchemaVersion},
      {"experiment", std::string(to_string(rep.kind))},
      {"config", to_json(rep.config)},
      {"dataset",
       {{"n_samples", rep.n_samples},
        {"d_in", rep.d_in},
        {"class_names", rep.class_names},
        {"provenance", rep.provenance}}},
      {"runs", runs},
      {"summary", summary},
      {"notices", rep.notices},
  };
}

/// Table layout per experiment: key columns, then fold mean and population
/// std of each metric, fixed to 6 decimals.
inline std::string summary_csv(const ExperimentReport& rep) {
  std::string out = "scorer";
  if (rep.kind == ExperimentKind::data_efficiency) out += ",fp_ratio";
  if (rep.kind == ExperimentKind::class_robustness) out += ",held_out_class";
  out += ",n_folds,ap_mean,ap_std,auc_mean,auc_std,accuracy_mean,accuracy_std,precision_mean,precision_std,"
         "sensitivity_mean,sensitivity_std,specificity_mean,specificity_std\n";
  for (const auto& s : summarize(rep)) {
    out += to_string(s.scorer);
    if (rep.kind == ExperimentKind::data_efficiency) out += "," + detail::ratio_text(s.ratio.value_or(0.0));
    if (rep.kind == ExperimentKind::class_robustness) out += "," + s.held_out_class.value_or("");
    out += "," + std::to_string(s.ap.n);
    for (const Stat* st : {&s.ap, &s.auc, &s.accuracy, &s.precision, &s.sensitivity, &s.specificity}) {
      out += "," + detail::fixed(st->mean) + "," + detail::fixed(st->std);
    }
    out += '\n';
  }
  return out;
}

inline std::string pr_csv(const RunResult& r) {
  std::string out = "threshold,precision,recall\n";
  for (const auto& p : r.pr) out += detail::g17(p.threshold) + "," + detail::g17(p.precision) + "," + detail::g17(p.recall) + "\n";
  return out;
}

inline std::string roc_csv(const RunResult& r) {
  std::string out = "threshold,fpr,tpr\n";
  for (const auto& p : r.roc) out += detail::g17(p.threshold) + "," + detail::g17(p.fpr) + "," + detail::g17(p.tpr) + "\n";
  return out;
}

inline std::string histogram_csv(const RunResult& r) {
  std::string out = "bin_lo,bin_hi,tp,fp\n";
  const auto& h = r.histogram;
  const std::size_t bins = h.tp.size();
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = h.lo + (h.hi - h.lo) * double(b) / double(bins);
    const double hi = h.lo + (h.hi - h.lo) * double(b + 1) / double(bins);
    out += detail::g17(lo) + "," + detail::g17(hi) + "," + std::to_string(h.tp[b]) + "," + std::to_string(h.fp[b]) + "\n";
  }
  return out;
}

/// Writes report.json, summary.csv, curves/ and traces/ under `dir`.
inline void write_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "curves");
  binary::write_file((dir / "report.json").string(), to_json(rep).dump(2) + "\n");
  binary::write_file((dir / "summary.csv").string(), summary_csv(rep));
  for (const auto& r : rep.runs) {
    const auto tag = run_tag(r);
    binary::write_file((dir / "curves" / (tag + "_pr.csv")).string(), pr_csv(r));
    binary::write_file((dir / "curves" / (tag + "_roc.csv")).string(), roc_csv(r));
    binary::write_file((dir / "curves" / (tag + "_hist.csv")).string(), histogram_csv(r));
    if (r.trace) {
      fs::create_directories(dir / "traces");
      std::ostringstream os;
      r.trace->write_csv(os);
      binary::write_file((dir / "traces" / (tag + ".csv")).string(), os.str());
    }
  }
}

}  // namespace fpflow::eval

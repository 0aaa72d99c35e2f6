// SPDX-License-Identifier: Apache-2.0
// fpflow: synth, train, score, eval and inspect-model subcommands.
//
// Every subcommand except inspect-model writes a run directory holding
// config.json (fully resolved settings), inputs.json (SHA-256 of every input
// file), run.log and its outputs. Exit codes: 0 ok, 2 configuration error,
// 3 data error, 4 numeric failure.

#include "fpflow/data/io.hpp"
#include "fpflow/data/synth.hpp"
#include "fpflow/eval/experiments.hpp"
#include "fpflow/eval/kfold.hpp"
#include "fpflow/eval/report.hpp"
#include "fpflow/model_file.hpp"
#include "fpflow/scoring.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fpflow;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

// ---- run directory -------------------------------------------------------------

class RunDir {
 public:
  RunDir(const std::string& command, const std::string& out, bool quiet) : quiet_(quiet) {
    if (!out.empty()) {
      path_ = out;
    } else {
      const char* env = std::getenv("FPFLOW_OUTPUT_ROOT");
      const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
      const std::time_t now = std::time(nullptr);
      char stamp[32];
      std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", std::localtime(&now));
      path_ = root / (command + "-" + stamp);
      for (int k = 2; fs::exists(path_); ++k) path_ = root / (command + "-" + stamp + "-" + std::to_string(k));
    }
    std::error_code ec;
    fs::create_directories(path_, ec);
    if (ec) throw ConfigError("cannot create output directory " + path_.string() + ": " + ec.message());
    log_.open(path_ / "run.log", std::ios::trunc);
    if (!log_) throw ConfigError("cannot write " + (path_ / "run.log").string());
  }

  const fs::path& path() const { return path_; }

  void log(const std::string& msg) {
    const std::time_t now = std::time(nullptr);
    char stamp[16];
    std::strftime(stamp, sizeof stamp, "%H:%M:%S", std::localtime(&now));
    log_ << '[' << stamp << "] " << msg << '\n';
    log_.flush();
    if (!quiet_) std::cerr << msg << '\n';
  }

  void add_input(const std::string& role, const fs::path& file) {
    inputs_[role] = {{"path", fs::absolute(file).lexically_normal().string()},
                     {"sha256", binary::sha256_hex(read_input(file))}};
  }

  void write(const std::string& name, std::string_view data) const {
    try {
      binary::write_file((path_ / name).string(), data);
    } catch (const std::runtime_error& e) {
      throw ConfigError(e.what());
    }
  }

  void finish(const json& config) const {
    write("config.json", config.dump(2) + "\n");
    write("inputs.json", inputs_.dump(2) + "\n");
  }

  static std::string read_input(const fs::path& file) {
    try {
      return binary::read_file(file.string());
    } catch (const std::runtime_error& e) {
      throw DataError(e.what());
    }
  }

 private:
  fs::path path_;
  std::ofstream log_;
  json inputs_ = json::object();
  bool quiet_;
};

json read_json_file(const std::string& path) {
  std::string text;
  try {
    text = binary::read_file(path);
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
}

/// Dataset manifests also pull their payload in as an input.
void add_dataset_inputs(RunDir& run, const fs::path& manifest) {
  run.add_input("dataset", manifest);
  if (manifest.extension() == ".csv") return;
  try {
    const auto m = json::parse(RunDir::read_input(manifest));
    run.add_input("dataset_payload", manifest.parent_path() / m.at("payload").get<std::string>());
  } catch (const json::exception&) {
    // load_dataset reports malformed manifests with a precise message.
  }
}

// ---- shared model/training options ---------------------------------------------

struct ModelFlags {
  std::optional<std::string> encoder;
  std::optional<Eigen::Index> encoder_out;
  std::optional<int> layers;
  std::optional<Eigen::Index> hidden;
  std::optional<int> mlp_hidden_layers;
  std::optional<double> s_max;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<double> weight_decay;
  std::optional<std::size_t> batch_tp;
  std::optional<std::size_t> batch_fp;
  std::optional<std::string> margin;
  std::optional<double> val_fraction;
  std::optional<std::uint64_t> seed;
  bool backbone_hparams = false;

  void attach(CLI::App* app) {
    app->add_option("--encoder", encoder, "Encoder kind: identity, linear or mlp");
    app->add_option("--encoder-out", encoder_out, "Encoder output dimension (0 keeps the input dimension)");
    app->add_option("--layers", layers, "Coupling layers");
    app->add_option("--hidden", hidden, "Hidden width of the coupling networks (0 = max(8, d/4))");
    app->add_option("--mlp-hidden-layers", mlp_hidden_layers, "Hidden layers per coupling network");
    app->add_option("--s-max", s_max, "Scale clamp bound");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--lr", lr, "AdamW learning rate");
    app->add_option("--weight-decay", weight_decay, "AdamW decoupled weight decay");
    app->add_option("--batch-tp", batch_tp, "TP batch size");
    app->add_option("--batch-fp", batch_fp, "FP batch size");
    app->add_option("--margin", margin, "FP hinge margin: 'adaptive' or a log-likelihood value");
    app->add_option("--val-fraction", val_fraction, "Validation fraction");
    app->add_option("--seed", seed, "Global seed");
    app->add_flag("--backbone-hparams", backbone_hparams,
                  "Large-feature preset: 32 layers, hidden 512, lr 1e-5, wd 0.1, 100 epochs, batch 2048 (32 for finetune)");
  }

  /// Order: built-in defaults, then --backbone-hparams, then the config file,
  /// then explicit flags.
  eval::ExperimentConfig resolve(eval::ExperimentConfig base, const json& file, train::Variant variant) const {
    if (backbone_hparams) {
      base.flow_layers = 32;
      base.flow_hidden = 512;
      const auto p = train::TrainConfig::backbone_preset(variant);
      base.train.epochs = p.epochs;
      base.train.lr = p.lr;
      base.train.weight_decay = p.weight_decay;
      base.train.batch_tp = p.batch_tp;
      base.train.batch_fp = p.batch_fp;
    }
    auto c = eval::config_from_json(file, base);
    if (encoder) {
      const auto k = parse_encoder_kind(*encoder);
      if (!k) throw ConfigError("--encoder must be identity, linear or mlp");
      c.encoder = *k;
    }
    if (encoder_out) c.encoder_out = *encoder_out;
    if (layers) c.flow_layers = *layers;
    if (hidden) c.flow_hidden = *hidden;
    if (mlp_hidden_layers) c.mlp_hidden_layers = *mlp_hidden_layers;
    if (s_max) c.s_max = *s_max;
    if (epochs) c.train.epochs = *epochs;
    if (lr) c.train.lr = *lr;
    if (weight_decay) c.train.weight_decay = *weight_decay;
    if (batch_tp) c.train.batch_tp = *batch_tp;
    if (batch_fp) c.train.batch_fp = *batch_fp;
    if (margin) {
      if (*margin == "adaptive") {
        c.train.margin_mode = train::MarginMode::adaptive;
      } else {
        double v = 0.0;
        if (!data::detail::parse_double(*margin, v)) throw ConfigError("--margin must be 'adaptive' or a number");
        c.train.margin_mode = train::MarginMode::fixed;
        c.train.margin_value = v;
      }
    }
    if (val_fraction) c.val_fraction = *val_fraction;
    if (seed) c.seed = *seed;
    if (c.flow_layers < 0 || c.mlp_hidden_layers < 0 || !(c.s_max > 0.0)) {
      throw ConfigError("flow: layers and depth must be >= 0 and s_max positive");
    }
    return c;
  }
};

std::string data_path_from(const std::string& flag, const json& file) {
  if (!flag.empty()) return flag;
  if (file.contains("data") && file.at("data").is_string()) return file.at("data").get<std::string>();
  throw ConfigError("no dataset given; pass --data or set \"data\" in the config file");
}

// ---- synth ---------------------------------------------------------------------

struct SynthArgs {
  std::string preset;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string format;
  std::string name;
  std::string out;
  bool quiet = false;
};

int cmd_synth(const SynthArgs& a) {
  const json file = a.config.empty() ? json::object() : read_json_file(a.config);
  const std::string preset = !a.preset.empty() ? a.preset : file.value("preset", std::string("default"));
  auto spec = data::synth_preset(preset, 0);
  json spec_json = file.contains("spec") ? file.at("spec") : json::object();
  spec = data::synth_spec_from_json(spec_json, spec);
  if (file.contains("seed")) spec.seed = file.at("seed").get<std::uint64_t>();
  if (a.seed) spec.seed = *a.seed;
  const auto fmt = data::parse_payload_format(!a.format.empty() ? a.format : file.value("format", std::string("csv")));
  const std::string name = !a.name.empty() ? a.name : file.value("name", std::string("dataset"));

  RunDir run("synth", a.out, a.quiet);
  if (!a.config.empty()) run.add_input("config", a.config);
  run.log("generating preset '" + preset + "' with seed " + std::to_string(spec.seed));
  const auto ds = data::synth_generate(spec);
  fs::path manifest;
  try {
    manifest = data::save_dataset(ds, run.path(), name, fmt);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot write dataset: ") + e.what());
  }
  run.log("wrote " + manifest.string() + " (" + std::to_string(ds.count(Label::tp)) + " TP, " +
          std::to_string(ds.count(Label::fp)) + " FP, d=" + std::to_string(ds.d_in()) + ")");
  run.finish({{"command", "synth"},
              {"preset", preset},
              {"seed", spec.seed},
              {"format", std::string(data::to_string(fmt))},
              {"name", name},
              {"spec", data::to_json(spec)}});
  std::cout << manifest.string() << '\n';
  return 0;
}

// ---- train ---------------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string variant;
  std::string config;
  std::string out;
  bool quiet = false;
  ModelFlags model;
};

json train_config_json(const eval::ExperimentConfig& c, train::Variant v, const std::string& data_path) {
  auto full = eval::to_json(c);
  return {{"command", "train"},
          {"data", data_path},
          {"variant", std::string(train::to_string(v))},
          {"seed", c.seed},
          {"val_fraction", c.val_fraction},
          {"encoder", full["encoder"]},
          {"flow", full["flow"]},
          {"train", full["train"]}};
}

int cmd_train(const TrainArgs& a) {
  const json file = a.config.empty() ? json::object() : read_json_file(a.config);
  const std::string vname = !a.variant.empty() ? a.variant : file.value("variant", std::string("mle"));
  const auto variant = train::parse_variant(vname);
  if (!variant) throw ConfigError("--variant must be mle, frozen or finetune");

  eval::ExperimentConfig base;
  base.train = train::TrainConfig{};  // standalone training keeps the full epoch budget
  if (*variant == train::Variant::finetune) base.encoder = EncoderKind::linear;
  const auto cfg = a.model.resolve(base, file, *variant);
  const std::string data_path = fs::absolute(data_path_from(a.data, file)).lexically_normal().string();

  RunDir run("train", a.out, a.quiet);
  if (!a.config.empty()) run.add_input("config", a.config);
  add_dataset_inputs(run, data_path);
  const auto ds = data::load_dataset(data_path).canonical();
  run.log("loaded " + data_path + ": " + std::to_string(ds.size()) + " samples, d=" + std::to_string(ds.d_in()));

  const auto split = eval::holdout_split(ds, cfg.val_fraction, derive_seed(cfg.seed, {30}));
  train::TrainData td;
  std::vector<std::size_t> tp, fp;
  for (auto i : split.train) (ds.samples()[i].label == Label::tp ? tp : fp).push_back(i);
  td.tp = train::FeatureRows(ds.features(tp));
  if (*variant != train::Variant::mle) td.fp = train::FeatureRows(ds.features(fp));
  td.val_x = ds.features(split.val);
  for (auto i : split.val) td.val_labels.push_back(ds.samples()[i].label);

  const Eigen::Index out_dim = cfg.encoder_out > 0 ? cfg.encoder_out : ds.d_in();
  EncoderModel enc;
  flow::FlowModel flow0;
  try {
    enc = EncoderModel::create(cfg.encoder, ds.d_in(), out_dim, derive_seed(cfg.seed, {10}));
    flow0 = flow::FlowModel::create({.dim = out_dim,
                                     .layers = cfg.flow_layers,
                                     .hidden = cfg.flow_hidden,
                                     .mlp_hidden_layers = cfg.mlp_hidden_layers,
                                     .s_max = cfg.s_max,
                                     .seed = derive_seed(cfg.seed, {11})});
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  train::TrainConfig tc = cfg.train;
  tc.variant = *variant;
  tc.seed = derive_seed(cfg.seed, {12});
  run.log("training " + vname + ": " + std::to_string(tp.size()) + " TP, " +
          std::to_string(*variant == train::Variant::mle ? 0 : fp.size()) + " FP, " +
          std::to_string(split.val.size()) + " validation samples");
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = train::train(td, enc, flow0, tc, [&](const std::string& m) { run.log(m); });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const json resolved = train_config_json(cfg, *variant, data_path);
  std::ostringstream trace;
  result.trace.write_csv(trace);
  run.write("trace.csv", trace.str());
  json meta = {{"training", resolved}, {"best_epoch", result.best_epoch}};
  meta["margin"] = std::isfinite(result.margin) ? json(result.margin) : json(nullptr);
  meta["data_sha256"] = binary::sha256_hex(RunDir::read_input(data_path));
  try {
    model_file::save(run.path() / "model.bin", result.encoder, result.flow, meta);
  } catch (const std::runtime_error& e) {
    throw ConfigError(e.what());
  }
  run.log("best epoch " + std::to_string(result.best_epoch) + ", " + std::to_string(secs) + " s; wrote model.bin");
  run.finish(resolved);
  std::cout << (run.path() / "model.bin").string() << '\n';
  return 0;
}

// ---- score ---------------------------------------------------------------------

struct ScoreArgs {
  std::string model;
  std::string data;
  std::optional<double> threshold;
  std::string out;
  bool quiet = false;
};

int cmd_score(const ScoreArgs& a) {
  RunDir run("score", a.out, a.quiet);
  run.add_input("model", a.model);
  add_dataset_inputs(run, a.data);
  const auto m = model_file::load(a.model);
  const auto ds = data::load_dataset(a.data);
  if (ds.d_in() != m.encoder.in_dim()) {
    throw DataError("model expects " + std::to_string(m.encoder.in_dim()) + " features, dataset has " +
                    std::to_string(ds.d_in()));
  }
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Eigen::VectorXd ll = log_likelihoods(ds.features(all), m.encoder, m.flow);

  std::string csv = a.threshold ? "id,log_likelihood,anomaly_score,decision\n" : "id,log_likelihood,anomaly_score\n";
  std::size_t rejected = 0, failed = 0;
  eval::ScoredSet set;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double l = ll(Eigen::Index(i));
    const double s = -l;
    if (std::isnan(s)) ++failed;
    csv += std::to_string(ds.samples()[i].id) + ',' + data::detail::format_double(l) + ',' +
           data::detail::format_double(s);
    if (a.threshold) {
      // A score that could not be computed is treated as maximally anomalous.
      const bool reject = std::isnan(s) || s > *a.threshold;
      rejected += reject;
      csv += reject ? ",reject" : ",accept";
    }
    csv += '\n';
    set.scores.push_back(s);
    set.labels.push_back(ds.samples()[i].label);
  }
  run.write("scores.csv", csv);
  run.log("scored " + std::to_string(ds.size()) + " samples" +
          (a.threshold ? ", rejected " + std::to_string(rejected) : std::string()) +
          (failed ? ", " + std::to_string(failed) + " non-finite" : std::string()));
  json resolved = {{"command", "score"},
                   {"model", fs::absolute(a.model).lexically_normal().string()},
                   {"data", fs::absolute(a.data).lexically_normal().string()}};
  resolved["threshold"] = a.threshold ? json(*a.threshold) : json(nullptr);
  if (set.has_both_labels()) {
    sanitize_scores(set.scores);
    const double ap = eval::average_precision(set), auc = eval::roc_auc(set);
    run.log("AP " + std::to_string(ap) + ", AUC " + std::to_string(auc) + " (FP = positive class)");
    run.write("metrics.json", json({{"ap", ap}, {"auc", auc}}).dump(2) + "\n");
  }
  run.finish(resolved);
  std::cout << (run.path() / "scores.csv").string() << '\n';
  return 0;
}

// ---- eval ----------------------------------------------------------------------

struct EvalArgs {
  std::string data;
  std::string experiment;
  std::string config;
  std::string scorers;
  std::string ratios;
  std::optional<int> folds;
  std::optional<int> jobs;
  std::string out;
  bool quiet = false;
  ModelFlags model;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_eval(const EvalArgs& a) {
  json file = a.config.empty() ? json::object() : read_json_file(a.config);
  if (!a.experiment.empty()) file["experiment"] = a.experiment;
  const auto kind_name = file.value("experiment", std::string("comparative"));
  const auto kind = eval::parse_experiment_kind(kind_name);
  if (!kind) throw ConfigError("--experiment must be comparative, data_efficiency or class_robustness");
  // --backbone-hparams batch sizes follow the finetune variant only when it is the sole flow scorer.
  auto cfg = a.model.resolve(eval::ExperimentConfig{}, file, train::Variant::mle);
  if (!a.scorers.empty()) {
    cfg.scorers.clear();
    for (const auto& s : split_list(a.scorers)) {
      const auto id = eval::parse_scorer(s);
      if (!id) throw ConfigError("unknown scorer '" + s + "'");
      cfg.scorers.push_back(*id);
    }
  }
  if (!a.ratios.empty()) {
    cfg.ratios.clear();
    for (const auto& s : split_list(a.ratios)) {
      double v = 0.0;
      if (!data::detail::parse_double(s, v)) throw ConfigError("bad ratio '" + s + "'");
      cfg.ratios.push_back(v);
    }
  }
  if (a.folds) cfg.folds = *a.folds;
  if (a.jobs) cfg.jobs = *a.jobs;
  if (cfg.folds < 2 || cfg.jobs < 1) throw ConfigError("folds must be >= 2 and jobs >= 1");
  const std::string data_path = fs::absolute(data_path_from(a.data, file)).lexically_normal().string();

  RunDir run("eval", a.out, a.quiet);
  if (!a.config.empty()) run.add_input("config", a.config);
  add_dataset_inputs(run, data_path);
  const auto ds = data::load_dataset(data_path);
  run.log("loaded " + data_path + ": " + std::to_string(ds.size()) + " samples, d=" + std::to_string(ds.d_in()));
  json resolved = eval::to_json(cfg);
  resolved["command"] = "eval";
  resolved["data"] = data_path;
  // Written first so an interrupted run still records what it was doing.
  run.finish(resolved);

  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = eval::run_experiment(ds, cfg, [&](const std::string& m) { run.log(m); });
  for (const auto& n : rep.notices) run.log("notice: " + n);
  try {
    eval::write_report(rep, run.path());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot write report: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.log(std::to_string(rep.runs.size()) + " runs in " + std::to_string(secs) + " s");
  std::cout << eval::summary_csv(rep);
  return 0;
}

// ---- inspect-model -------------------------------------------------------------

int cmd_inspect(const std::string& path) {
  const std::string bytes = RunDir::read_input(path);
  const auto m = model_file::decode(bytes);
  json j = model_file::describe(m.encoder, m.flow);
  std::size_t n_params = 0;
  for (const Tensor* p : m.flow.parameters()) n_params += std::size_t(p->size());
  j["flow"]["parameters"] = n_params;
  std::size_t n_enc = 0;
  for (const Tensor* p : m.encoder.parameters()) n_enc += std::size_t(p->size());
  j["encoder"]["parameters"] = n_enc;
  j["sha256"] = binary::sha256_hex(bytes);
  const fs::path sidecar = path + ".json";
  if (fs::exists(sidecar)) {
    try {
      j["sidecar"] = json::parse(binary::read_file(sidecar.string()));
    } catch (const std::exception& e) {
      j["sidecar_error"] = e.what();
    }
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Likelihood-based false-positive rejection with normalizing flows"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fpflow 0.1.0");

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic TP/FP feature dataset");
  synth->add_option("--preset,--hardness", sa.preset, "default, easy, hard or confounded");
  synth->add_option("--config", sa.config, "JSON file: {preset, seed, format, name, spec: {...}}");
  synth->add_option("--seed", sa.seed, "Generator seed");
  synth->add_option("--format", sa.format, "Payload format: csv or binary");
  synth->add_option("--name", sa.name, "File stem of the manifest and payload");
  synth->add_option("--out", sa.out, "Run directory (default: $FPFLOW_OUTPUT_ROOT or ./runs)");
  synth->add_flag("-q,--quiet", sa.quiet, "Log to run.log only");

  TrainArgs ta;
  auto* trn = app.add_subcommand("train", "Train an encoder and flow on a dataset");
  trn->add_option("--data", ta.data, "Dataset manifest or bare CSV");
  trn->add_option("--variant", ta.variant, "mle, frozen or finetune");
  trn->add_option("--config", ta.config, "JSON config; explicit flags take precedence");
  trn->add_option("--out", ta.out, "Run directory");
  trn->add_flag("-q,--quiet", ta.quiet, "Log to run.log only");
  ta.model.attach(trn);

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score a dataset with a trained model");
  score->add_option("--model", sc.model, "Model file")->required();
  score->add_option("--data", sc.data, "Dataset manifest or bare CSV")->required();
  score->add_option("--threshold", sc.threshold, "Reject iff anomaly_score > threshold");
  score->add_option("--out", sc.out, "Run directory");
  score->add_flag("-q,--quiet", sc.quiet, "Log to run.log only");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Run a cross-validated experiment");
  ev->add_option("--data", ea.data, "Dataset manifest or bare CSV");
  ev->add_option("--experiment", ea.experiment, "comparative, data_efficiency or class_robustness");
  ev->add_option("--config", ea.config, "JSON config (a previous run's config.json reproduces it)");
  ev->add_option("--scorers", ea.scorers, "Comma list: flow_mle,flow_frozen,flow_finetune,kde,pca,gaussian");
  ev->add_option("--ratios", ea.ratios, "Comma list of FP sampling ratios for data_efficiency");
  ev->add_option("--folds", ea.folds, "Cross-validation folds");
  ev->add_option("--jobs", ea.jobs, "Worker threads; results do not depend on it");
  ev->add_option("--out", ea.out, "Run directory");
  ev->add_flag("-q,--quiet", ea.quiet, "Log to run.log only");
  ea.model.attach(ev);

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-model", "Print the structure of a model file");
  inspect->add_option("model", inspect_path, "Model file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*trn) return cmd_train(ta);
    if (*score) return cmd_score(sc);
    if (*ev) return cmd_eval(ea);
    if (*inspect) return cmd_inspect(inspect_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

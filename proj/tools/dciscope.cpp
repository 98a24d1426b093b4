// dciscope: synthetic PDCCH/DCI traffic workbench.
// Subcommands: gen, train, eval, tune-ood, profile.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dci/core.hpp"
#include "dci/learn.hpp"
#include "dci/ood.hpp"
#include "dci/profile.hpp"
#include "dci/sessionize.hpp"
#include "dci/synth.hpp"

namespace {

using dci::Trace;
using nlohmann::ordered_json;

int g_verbosity = 1;

void log_info(const std::string& msg) {
  if (g_verbosity >= 1) std::cerr << msg << '\n';
}

std::vector<dci::synth::AppClass> parse_apps(const std::string& spec) {
  std::vector<dci::synth::AppClass> apps;
  if (spec == "all") {
    for (int a = 0; a < dci::synth::kAppCount; ++a)
      apps.push_back(static_cast<dci::synth::AppClass>(a));
    return apps;
  }
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const auto comma = spec.find(',', pos);
    const auto token = spec.substr(pos, comma == std::string::npos ? spec.size() - pos
                                                                   : comma - pos);
    auto app = dci::synth::app_from_tag(token);
    if (!app) throw dci::Error("unknown app tag '" + token + "'");
    apps.push_back(*app);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (apps.empty()) throw dci::Error("no apps selected");
  return apps;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dci::Error("cannot open " + path + " for writing");
  out << content;
}

Trace slice_rebased(const Trace& trace, std::int64_t start_s, std::int64_t duration_s) {
  Trace out;
  const std::int64_t lo = start_s * 1000, hi = (start_s + duration_s) * 1000;
  for (const auto& r : trace.records) {
    if (r.tti_ms < lo || r.tti_ms >= hi) continue;
    auto copy = r;
    copy.tti_ms -= lo;
    out.records.push_back(copy);
  }
  out.duration_ms = out.records.empty() ? 0 : out.records.back().tti_ms + 1;
  return out;
}

std::vector<dci::synth::CellUserSpec> background_specs(int count, std::uint64_t seed) {
  // round-robin over the app presets, per-user seeds derived downstream
  std::vector<dci::synth::CellUserSpec> specs;
  (void)seed;
  for (int i = 0; i < count; ++i) {
    auto model = dci::synth::preset(static_cast<dci::synth::AppClass>(i % dci::synth::kAppCount));
    specs.push_back({model, 1});
  }
  return specs;
}

// JSON model config: {"models":[{"app":..., "burst_rate_bps":..., "steady_rate_bps":...,
// "ul_dl_ratio":..., "burst_duration_s":..., "chunk_period_s":..., "noise_cv":...,
// "seed":..., "count":...}, ...]}
std::vector<dci::synth::CellUserSpec> load_model_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw dci::Error("cannot open model config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw dci::Error(std::string("bad model config: ") + e.what());
  }
  std::vector<dci::synth::CellUserSpec> specs;
  for (const auto& entry : j.at("models")) {
    const auto app_tag = entry.at("app").get<std::string>();
    const auto app = dci::synth::app_from_tag(app_tag);
    if (!app) throw dci::Error("unknown app tag '" + app_tag + "' in model config");
    dci::synth::TrafficModel model = dci::synth::preset(*app);
    model.burst_rate_bps = entry.value("burst_rate_bps", model.burst_rate_bps);
    model.steady_rate_bps = entry.value("steady_rate_bps", model.steady_rate_bps);
    model.ul_dl_ratio = entry.value("ul_dl_ratio", model.ul_dl_ratio);
    model.burst_duration_s = entry.value("burst_duration_s", model.burst_duration_s);
    model.chunk_period_s = entry.value("chunk_period_s", model.chunk_period_s);
    model.noise_cv = entry.value("noise_cv", model.noise_cv);
    model.seed = entry.value("seed", model.seed);
    dci::synth::validate(model);
    specs.push_back({model, entry.value("count", 1)});
  }
  if (specs.empty()) throw dci::Error("model config lists no models");
  return specs;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string preset = "labeled";
  std::string apps = "all";
  std::int64_t reps = 10;
  std::int64_t on_s = 60;
  std::int64_t pause_s = 10;
  int background = 12;
  int users = 30;
  int unknown = 0;
  std::int64_t duration_s = 600;
  std::uint64_t seed = 1;
  std::string models;  // JSON config overriding the cell-preset user mix
  std::string out = "trace.jsonl";
};

int cmd_gen(const GenArgs& args) {
  const std::string meta_path = args.out + ".meta.json";
  ordered_json meta;
  meta["format"] = "dci-trace-meta";
  meta["version"] = 1;
  meta["preset"] = args.preset;
  meta["seed"] = args.seed;

  Trace trace;
  std::size_t user_count = 0;
  if (args.preset == "labeled") {
    const auto apps = parse_apps(args.apps);
    const dci::synth::WatermarkSpec spec{args.on_s, args.pause_s, args.reps};
    dci::synth::validate(spec);
    meta["on_s"] = spec.on_duration_s;
    meta["pause_s"] = spec.pause_duration_s;
    meta["reps"] = spec.repetitions;
    meta["background"] = args.background;
    ordered_json segments = ordered_json::array();
    std::vector<dci::Rnti> used;
    const std::int64_t span = spec.span_s();
    for (std::size_t i = 0; i < apps.size(); ++i) {
      auto cell = dci::synth::generate_cell_trace(
          background_specs(args.background, args.seed),
          std::make_pair(dci::synth::preset(apps[i]), spec), span,
          dci::mix_seed(args.seed, i + 1), used);
      used.insert(used.end(), cell.user_rntis.begin(), cell.user_rntis.end());
      used.push_back(*cell.watermark_rnti);
      const std::int64_t offset_ms = static_cast<std::int64_t>(i) * span * 1000;
      for (auto r : cell.trace.records) {
        r.tti_ms += offset_ms;
        trace.records.push_back(r);
      }
      segments.push_back({{"app", dci::synth::tag(apps[i])},
                          {"start_s", static_cast<std::int64_t>(i) * span},
                          {"duration_s", span}});
      user_count += cell.user_rntis.size() + 1;
    }
    meta["segments"] = std::move(segments);
  } else if (args.preset == "cell") {
    auto specs = args.models.empty() ? background_specs(args.users, args.seed)
                                     : load_model_config(args.models);
    if (args.unknown > 0) specs.push_back({dci::synth::unknown_preset(), args.unknown});
    auto cell = dci::synth::generate_cell_trace(specs, std::nullopt, args.duration_s, args.seed);
    trace = std::move(cell.trace);
    user_count = cell.user_rntis.size();
    meta["users"] = static_cast<std::int64_t>(user_count);
    meta["unknown"] = args.unknown;
    meta["duration_s"] = args.duration_s;
  } else {
    throw dci::Error("unknown preset '" + args.preset + "' (labeled|cell)");
  }
  std::sort(trace.records.begin(), trace.records.end(),
            [](const dci::DciRecord& a, const dci::DciRecord& b) {
              if (a.tti_ms != b.tti_ms) return a.tti_ms < b.tti_ms;
              if (a.rnti != b.rnti) return a.rnti < b.rnti;
              return a.dir < b.dir;
            });
  trace.duration_ms = trace.records.empty() ? 0 : trace.records.back().tti_ms + 1;

  dci::write_trace_file(trace, args.out);
  write_file(meta_path, meta.dump(2) + "\n");
  std::cout << "records " << trace.records.size() << " users " << user_count << " span_s "
            << (trace.duration_ms + 999) / 1000 << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct DataArgs {
  std::string trace;
  std::string meta;  // defaults to trace + ".meta.json"
  int w_s = 40;
  int stride_s = 15;
  std::string mode = "async";
};

ordered_json load_meta(const DataArgs& args) {
  const std::string path = args.meta.empty() ? args.trace + ".meta.json" : args.meta;
  std::ifstream in(path);
  if (!in) throw dci::Error("cannot open meta file " + path);
  ordered_json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw dci::Error(std::string("bad meta file: ") + e.what());
  }
  if (meta.value("format", "") != "dci-trace-meta")
    throw dci::Error("not a trace meta file: " + path);
  return meta;
}

// Recovers the labeled sessions of a watermarked trace: per app segment,
// re-detect the watermark RNTI and label its sessions.
std::vector<dci::Session> labeled_sessions(const Trace& trace, const ordered_json& meta) {
  if (meta.value("preset", "") != "labeled")
    throw dci::Error("trace meta is not a labeled preset");
  const dci::synth::WatermarkSpec spec{meta.at("on_s").get<std::int64_t>(),
                                       meta.at("pause_s").get<std::int64_t>(),
                                       meta.at("reps").get<std::int64_t>()};
  std::vector<dci::Session> labeled;
  for (const auto& seg : meta.at("segments")) {
    const auto app_tag = seg.at("app").get<std::string>();
    const auto app = dci::synth::app_from_tag(app_tag);
    if (!app) throw dci::Error("unknown app tag in meta: " + app_tag);
    const Trace segment = slice_rebased(trace, seg.at("start_s").get<std::int64_t>(),
                                        seg.at("duration_s").get<std::int64_t>());
    const auto sessions = dci::extract_sessions(segment);
    const dci::Rnti mark = dci::detect_watermark(sessions, spec);
    std::vector<dci::Session> own;
    for (const auto& s : sessions)
      if (s.rnti == mark) own.push_back(s);
    auto tagged = dci::split_and_label(own, *app);
    labeled.insert(labeled.end(), tagged.begin(), tagged.end());
  }
  return labeled;
}

dci::learn::Dataset build_dataset(const DataArgs& args, dci::learn::Task task) {
  const Trace trace = dci::parse_trace_file(args.trace);
  const auto meta = load_meta(args);
  const auto sessions = labeled_sessions(trace, meta);
  dci::WindowingParams params{args.w_s, args.stride_s,
                              args.mode == "sync" ? dci::WindowMode::Synchronous
                                                  : dci::WindowMode::Asynchronous};
  std::vector<dci::WindowSample> windows;
  for (const auto& s : sessions) {
    auto w = dci::make_windows(s, params);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  dci::normalize_windows(windows);
  return dci::learn::make_dataset(std::move(windows), task);
}

ordered_json report_json(const dci::learn::EvalReport& report) {
  ordered_json j;
  j["accuracy"] = report.accuracy;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  j["f_score"] = report.f_score;
  j["confusion"] = report.confusion;
  return j;
}

struct TrainArgs {
  DataArgs data;
  std::string model_type = "cnn";
  std::string task = "service";
  int epochs = 50;
  int batch_size = 32;
  double lr = 1e-3;
  double split = 0.7;
  std::uint64_t seed = 1;
  std::string out = "model.dci";
  std::string metrics;
  std::string dump_windows;
};

int cmd_train(const TrainArgs& args) {
  const auto task = dci::learn::task_from_string(args.task);
  auto dataset = build_dataset(args.data, task);
  if (!args.dump_windows.empty()) dci::save_windows(dataset.windows, args.dump_windows);
  log_info("dataset: " + std::to_string(dataset.size()) + " windows");

  dci::learn::SavedModel saved;
  saved.meta.type = args.model_type;
  saved.meta.task = task;
  saved.meta.k = dataset.num_classes;
  saved.meta.windowing = {args.data.w_s, args.data.stride_s,
                          args.data.mode == "sync" ? dci::WindowMode::Synchronous
                                                   : dci::WindowMode::Asynchronous};
  saved.meta.split = args.split;
  saved.meta.seed = args.seed;

  dci::learn::TrainConfig cfg;
  cfg.epochs = args.epochs;
  cfg.batch_size = args.batch_size;
  cfg.opt.lr = args.lr;
  cfg.seed = args.seed;
  cfg.split = args.split;

  dci::learn::TrainResult result;
  if (args.model_type == "mlp") {
    auto model = dci::learn::make_mlp(args.data.w_s * 2, dataset.num_classes, args.seed);
    result = dci::learn::train(model, dataset, cfg);
    saved.model = std::move(model);
  } else if (args.model_type == "cnn") {
    auto model = dci::learn::make_cnn(args.data.w_s, dataset.num_classes, args.seed);
    result = dci::learn::train(model, dataset, cfg);
    saved.model = std::move(model);
  } else if (args.model_type == "knn") {
    result.split = dci::learn::balanced_split(dataset.labels, args.split, args.seed);
    saved.model = dci::learn::make_knn(dataset, result.split.train);
  } else if (args.model_type == "logreg") {
    result.split = dci::learn::balanced_split(dataset.labels, args.split, args.seed);
    saved.model = dci::learn::train_logreg(dataset, result.split.train, {});
  } else {
    throw dci::Error("unknown model type " + args.model_type);
  }

  const auto report = dci::learn::evaluate(saved, dataset.subset(result.split.val));
  dci::learn::save_model(saved, args.out);

  ordered_json metrics;
  metrics["model"] = args.model_type;
  metrics["task"] = args.task;
  metrics["k"] = dataset.num_classes;
  metrics["w"] = args.data.w_s;
  metrics["mode"] = args.data.mode;
  metrics["stride"] = args.data.stride_s;
  metrics["seed"] = args.seed;
  metrics["param_count"] = saved.parameter_count();
  metrics["train_size"] = result.split.train.size();
  metrics["val_size"] = result.split.val.size();
  metrics["validation"] = report_json(report);
  metrics["curves"] = {{"train_acc", result.train_acc},
                       {"val_acc", result.val_acc},
                       {"train_loss", result.train_loss}};
  write_file(args.metrics.empty() ? args.out + ".metrics.json" : args.metrics,
             metrics.dump(2) + "\n");
  std::cout << "val_accuracy " << report.accuracy << " windows " << dataset.size()
            << " params " << saved.parameter_count() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  DataArgs data;
  std::string model;
  std::string metrics;
};

int cmd_eval(EvalArgs args) {
  const auto loaded = dci::learn::load_model(args.model);
  args.data.w_s = loaded.model.meta.windowing.w_s;  // window length is fixed by the model
  const auto dataset = build_dataset(args.data, loaded.model.meta.task);
  const auto report = dci::learn::evaluate(loaded.model, dataset);
  ordered_json metrics;
  metrics["model"] = loaded.model.meta.type;
  metrics["w"] = args.data.w_s;
  metrics["mode"] = args.data.mode;
  metrics["stride"] = args.data.stride_s;
  metrics["windows"] = dataset.size();
  metrics["evaluation"] = report_json(report);
  if (!args.metrics.empty()) write_file(args.metrics, metrics.dump(2) + "\n");
  std::cout << "accuracy " << report.accuracy << " windows " << dataset.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TuneArgs {
  DataArgs data;
  std::string model;
  double ridge = 1e-6;
  std::size_t cap = 500;
  std::string out = "detector.json";
  std::string sweep;
};

// Macro F over the validation windows with rejections counted as errors:
// a rejected window is assigned a synthetic class K that never occurs in
// the truth.
double f_with_rejections(const std::vector<int>& truth,
                         const std::vector<dci::ood::GateResult>& gates, int k, double t) {
  std::vector<int> pred(gates.size());
  for (std::size_t i = 0; i < gates.size(); ++i)
    pred[i] = gates[i].depth < t ? k : gates[i].cls;
  return dci::learn::report_from_predictions(truth, pred, k + 1).f_score;
}

int cmd_tune_ood(const TuneArgs& args) {
  const auto loaded = dci::learn::load_model(args.model);
  DataArgs data = args.data;
  data.w_s = loaded.model.meta.windowing.w_s;
  data.stride_s = loaded.model.meta.windowing.stride_s;
  data.mode = loaded.model.meta.windowing.mode == dci::WindowMode::Synchronous ? "sync" : "async";
  const auto dataset = build_dataset(data, loaded.model.meta.task);
  const auto split = dci::learn::balanced_split(dataset.labels, loaded.model.meta.split,
                                                loaded.model.meta.seed);

  std::vector<dci::WindowSample> train_windows, val_windows;
  std::vector<int> train_labels, val_labels;
  for (auto i : split.train) {
    train_windows.push_back(dataset.windows[i]);
    train_labels.push_back(dataset.labels[i]);
  }
  for (auto i : split.val) {
    val_windows.push_back(dataset.windows[i]);
    val_labels.push_back(dataset.labels[i]);
  }

  const dci::ood::ProbaFn proba = [&](const dci::WindowSample& w) {
    return loaded.model.proba(w);
  };
  auto detector = dci::ood::build_detector(proba, dataset.num_classes, train_windows,
                                           train_labels, args.ridge, args.cap,
                                           loaded.model.meta.seed);
  detector.model_hash = loaded.file_hash;
  const double t_star = dci::ood::tune_threshold(detector, proba, val_windows);
  dci::ood::save_detector(detector, args.out);

  const auto gates = dci::ood::classify_with_ood_batch(detector, proba, val_windows);
  std::string sweep = "t,f_with_ood,f_without_ood\n";
  const double f_plain = f_with_rejections(val_labels, gates, dataset.num_classes, -1.0);
  char line[96];
  for (int i = 0; i <= 50; ++i) {
    const double t = static_cast<double>(i) / 50.0;
    std::snprintf(line, sizeof line, "%.2f,%.6f,%.6f\n", t,
                  f_with_rejections(val_labels, gates, dataset.num_classes, t), f_plain);
    sweep += line;
  }
  write_file(args.sweep.empty() ? args.out + ".sweep.csv" : args.sweep, sweep);
  std::cout << "t_star " << t_star << " refs_per_class";
  for (const auto& c : detector.classes) std::cout << ' ' << c.vectors.size();
  std::cout << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct ProfileArgs {
  std::string trace;
  std::string model;
  std::string detector;
  std::string out = "report.csv";
  std::string weight = "bits";
};

int cmd_profile(const ProfileArgs& args) {
  const auto loaded = dci::learn::load_model(args.model);
  const auto detector = dci::ood::load_detector(args.detector);
  if (detector.model_hash != loaded.file_hash)
    throw dci::CompatibilityError("detector was tuned against a different model file");
  if (detector.classes.size() != static_cast<std::size_t>(loaded.model.meta.k))
    throw dci::CompatibilityError("detector class count does not match the model");
  const Trace trace = dci::parse_trace_file(args.trace);
  const auto decomposition = dci::profile::decompose(
      trace, loaded.model, detector, loaded.model.meta.windowing,
      args.weight == "sessions" ? dci::profile::Weighting::Sessions
                                : dci::profile::Weighting::Bits);
  write_file(args.out, dci::profile::render_report(decomposition));
  std::cout << dci::profile::render_summary(decomposition);
  return 0;
}

void add_data_options(CLI::App* cmd, DataArgs& data, bool with_windowing) {
  cmd->add_option("--trace", data.trace, "input trace (JSONL)")->required();
  cmd->add_option("--meta", data.meta, "trace meta file (default: <trace>.meta.json)");
  if (with_windowing) {
    cmd->add_option("-W,--window", data.w_s, "window length in seconds")
        ->check(CLI::PositiveNumber);
    cmd->add_option("-S,--stride", data.stride_s, "window stride in seconds")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mode", data.mode, "windowing mode")
        ->check(CLI::IsMember({"sync", "async"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic LTE DCI traffic generation, classification and profiling"};
  app.require_subcommand(1);
  app.add_flag_callback("-q,--quiet", [] { g_verbosity = 0; }, "suppress progress output");

  GenArgs gen;
  auto* cmd_gen_p = app.add_subcommand("gen", "generate a synthetic DCI trace");
  cmd_gen_p->add_option("--preset", gen.preset, "labeled|cell")->check(CLI::IsMember({"labeled", "cell"}));
  cmd_gen_p->add_option("--apps", gen.apps, "app list for the labeled preset, or 'all'");
  cmd_gen_p->add_option("--reps", gen.reps, "watermark repetitions per app")->check(CLI::PositiveNumber);
  cmd_gen_p->add_option("--on", gen.on_s, "watermark on-duration (s)")->check(CLI::PositiveNumber);
  cmd_gen_p->add_option("--pause", gen.pause_s, "watermark pause (s)")->check(CLI::PositiveNumber);
  cmd_gen_p->add_option("--background", gen.background, "background users per segment")
      ->check(CLI::NonNegativeNumber);
  cmd_gen_p->add_option("--users", gen.users, "users for the cell preset")->check(CLI::NonNegativeNumber);
  cmd_gen_p->add_option("--unknown", gen.unknown, "additional unknown-app users (cell preset)")
      ->check(CLI::NonNegativeNumber);
  cmd_gen_p->add_option("--duration", gen.duration_s, "cell preset duration (s)")
      ->check(CLI::PositiveNumber);
  cmd_gen_p->add_option("--models", gen.models, "JSON traffic-model config (cell preset)");
  cmd_gen_p->add_option("--seed", gen.seed, "generation seed");
  cmd_gen_p->add_option("--out", gen.out, "output trace path");

  TrainArgs train;
  auto* cmd_train_p = app.add_subcommand("train", "train a classifier on a watermarked trace");
  add_data_options(cmd_train_p, train.data, true);
  cmd_train_p->add_option("--model", train.model_type, "classifier type")
      ->check(CLI::IsMember({"mlp", "cnn", "knn", "logreg"}));
  cmd_train_p->add_option("--task", train.task, "service|app")
      ->check(CLI::IsMember({"service", "app"}));
  cmd_train_p->add_option("--epochs", train.epochs, "training epochs")->check(CLI::NonNegativeNumber);
  cmd_train_p->add_option("--batch", train.batch_size, "batch size")->check(CLI::PositiveNumber);
  cmd_train_p->add_option("--lr", train.lr, "RMSprop learning rate");
  cmd_train_p->add_option("--split", train.split, "train fraction of the class-balanced split");
  cmd_train_p->add_option("--seed", train.seed, "training seed");
  cmd_train_p->add_option("--out", train.out, "model output path");
  cmd_train_p->add_option("--metrics", train.metrics, "metrics JSON path");
  cmd_train_p->add_option("--dump-windows", train.dump_windows, "also save the window dataset");

  EvalArgs eval;
  auto* cmd_eval_p = app.add_subcommand("eval", "evaluate a model on a watermarked trace");
  add_data_options(cmd_eval_p, eval.data, true);
  cmd_eval_p->add_option("--model", eval.model, "model file")->required();
  cmd_eval_p->add_option("--metrics", eval.metrics, "metrics JSON path");

  TuneArgs tune;
  auto* cmd_tune_p = app.add_subcommand("tune-ood", "build and tune the OOD detector");
  add_data_options(cmd_tune_p, tune.data, false);
  cmd_tune_p->add_option("--model", tune.model, "model file")->required();
  cmd_tune_p->add_option("--ridge", tune.ridge, "covariance ridge");
  cmd_tune_p->add_option("--cap", tune.cap, "max reference vectors per class");
  cmd_tune_p->add_option("--out", tune.out, "detector output path");
  cmd_tune_p->add_option("--sweep", tune.sweep, "F-score-vs-threshold CSV path");

  ProfileArgs profile;
  auto* cmd_profile_p = app.add_subcommand("profile", "decompose an unlabeled trace");
  cmd_profile_p->add_option("--trace", profile.trace, "input trace (JSONL)")->required();
  cmd_profile_p->add_option("--model", profile.model, "model file")->required();
  cmd_profile_p->add_option("--detector", profile.detector, "detector file")->required();
  cmd_profile_p->add_option("--out", profile.out, "report CSV path");
  cmd_profile_p->add_option("--weight", profile.weight, "share weighting")
      ->check(CLI::IsMember({"bits", "sessions"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_gen_p->parsed()) return cmd_gen(gen);
    if (cmd_train_p->parsed()) return cmd_train(train);
    if (cmd_eval_p->parsed()) return cmd_eval(eval);
    if (cmd_tune_p->parsed()) return cmd_tune_ood(tune);
    if (cmd_profile_p->parsed()) return cmd_profile(profile);
  } catch (const dci::CompatibilityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const dci::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

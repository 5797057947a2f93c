#include "fedfuse/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "fedfuse/config.hpp"
#include "fedfuse/dataset.hpp"
#include "fedfuse/dsfusion.hpp"
#include "fedfuse/errors.hpp"
#include "fedfuse/federation.hpp"
#include "fedfuse/latency.hpp"
#include "fedfuse/metrics.hpp"
#include "fedfuse/nn.hpp"
#include "fedfuse/rng.hpp"
#include "json.hpp"

namespace fedfuse::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kCliTransferTag = 0x71;

// Softmax scores this small cannot express genuine evidence; flooring keeps
// confidently disagreeing models combinable instead of erroring out.
constexpr double kFusionProbFloor = 1e-9;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

data::LabeledDataset build_dataset(const SyntheticParams& p) {
  return data::generate_synthetic(p.classes, p.dim, p.samples_per_class,
                                  p.cluster_spread, p.label_noise, p.seed);
}

data::LabeledDataset load_configured_dataset(const DatasetSection& section) {
  if (section.synthetic) return build_dataset(*section.synthetic);
  return data::load_feature_file(section.feature_file);
}

json metrics_to_json(const metrics::MetricReport& report,
                     const std::vector<std::string>& class_names) {
  json per_class = json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& m = report.per_class[c];
    per_class.push_back(json{{"class", class_names[c]},
                             {"tp", m.tp},
                             {"fp", m.fp},
                             {"fn", m.fn},
                             {"tn", m.tn},
                             {"precision", m.precision},
                             {"recall", m.recall},
                             {"f1", m.f1},
                             {"specificity", m.specificity},
                             {"mcc", m.mcc},
                             {"degenerate", m.any_degenerate()}});
  }
  return json{{"averaging", "macro"},
              {"accuracy", report.macro.accuracy},
              {"precision", report.macro.precision},
              {"recall", report.macro.recall},
              {"f1", report.macro.f1},
              {"specificity", report.macro.specificity},
              {"mcc", report.macro.mcc},
              {"per_class", per_class}};
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << content;
}

struct FusionEval {
  metrics::MetricReport report;
  double accuracy = 0.0;
  double mean_conflict = 0.0;
  double max_conflict = 0.0;
};

/// Evaluates the evidential fusion of the listed global models on a dataset:
/// per sample, each model's class probabilities become a Bayesian mass, the
/// masses are combined, and the max-belief class is the fused prediction.
FusionEval evaluate_fusion(const std::vector<fed::GlobalModel>& models,
                           const std::vector<std::string>& fusion_models,
                           const data::LabeledDataset& test) {
  std::vector<const fed::GlobalModel*> used;
  for (const auto& name : fusion_models) {
    for (const auto& m : models) {
      if (m.name == name) used.push_back(&m);
    }
  }
  ds::FrameOfDiscernment frame(test.class_names);

  std::vector<int> fused_predictions(test.size(), 0);
  double conflict_sum = 0.0;
  double conflict_max = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    std::vector<ds::MassFunction> masses;
    masses.reserve(used.size());
    for (const auto* model : used) {
      auto probs = nn::forward(model->weights, model->spec, test.features[i]);
      for (auto& p : probs) p = std::max(p, kFusionProbFloor);
      masses.push_back(ds::mass_from_probs(frame, probs));
    }
    const auto combined = ds::combine_all(masses);
    const auto decision = ds::decide_max_belief(combined);
    fused_predictions[i] = static_cast<int>(decision.index);
    conflict_sum += combined.conflict;
    conflict_max = std::max(conflict_max, combined.conflict);
    if (fused_predictions[i] == test.labels[i]) ++correct;
  }

  FusionEval eval;
  const auto cm = metrics::ConfusionMatrix::from_predictions(
      test.labels, fused_predictions, test.num_classes());
  eval.report = metrics::macro_report(cm);
  eval.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  eval.mean_conflict = conflict_sum / static_cast<double>(test.size());
  eval.max_conflict = conflict_max;
  return eval;
}

std::string round_csv(const std::vector<fed::RoundRecord>& history,
                      bool timings) {
  std::ostringstream out;
  out << "round,model,client_id,train_loss,eval_loss,eval_accuracy,duration_ms\n";
  for (const auto& record : history) {
    for (const auto& c : record.clients) {
      out << record.round_index << ',' << c.model << ',' << c.client_id << ','
          << fmt(c.train_loss) << ',' << fmt(c.eval_loss) << ','
          << fmt(c.eval_accuracy) << ",\n";
    }
    for (const auto& g : record.globals) {
      out << record.round_index << ',' << g.model << ",global,," << fmt(g.eval_loss)
          << ',' << fmt(g.eval_accuracy) << ','
          << (timings ? fmt(record.duration_ms) : std::string("0")) << "\n";
    }
  }
  return out.str();
}

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed_override;
  std::size_t threads = 0;  // 0: one per hardware thread

  std::size_t effective_threads() const {
    if (threads > 0) return threads;
    const auto hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
};

ExperimentConfig load_experiment(const CommonOptions& opts) {
  if (opts.config_path.empty()) {
    throw ConfigError("--config is required for this command");
  }
  auto cfg = ExperimentConfig::load_file(opts.config_path);
  if (!opts.out_dir.empty()) cfg.output.dir = opts.out_dir;
  if (opts.seed_override) cfg.federation.seed = *opts.seed_override;
  cfg.federation.threads = opts.effective_threads();
  cfg.validate();
  return cfg;
}

int cmd_federate(const CommonOptions& opts, bool timings) {
  const auto cfg = load_experiment(opts);

  // Everything that can fail is resolved before any output is written.
  const auto full = load_configured_dataset(cfg.dataset);
  const auto split =
      data::split_train_val_test(full, cfg.dataset.split, cfg.dataset.split_seed);

  std::optional<std::vector<nn::WeightVector>> initial;
  auto fed_cfg = cfg.federation;
  if (cfg.transfer.enabled) {
    const auto source = cfg.transfer.source
                            ? build_dataset(*cfg.transfer.source)
                            : data::load_feature_file(cfg.transfer.source_feature_file);
    initial.emplace();
    for (std::size_t m = 0; m < fed_cfg.models.size(); ++m) {
      fed_cfg.models[m].spec.head_start = cfg.transfer.head_start;
      nn::TrainConfig source_cfg = fed_cfg.train;
      source_cfg.epochs = cfg.transfer.epochs;
      source_cfg.seed = rng::derive(fed_cfg.seed, kCliTransferTag, m);
      initial->push_back(
          fed::transfer_init(source, fed_cfg.models[m].spec, source_cfg));
    }
  }

  // Inputs are fully resolved; outputs may be created from here on.
  const fs::path out_dir(cfg.output.dir);
  fs::create_directories(out_dir);
  const std::size_t interval = cfg.output.cadence_interval();
  fed::RoundObserver observer;
  if (interval > 0) {
    fs::create_directories(out_dir / "checkpoints");
    observer = [&](std::size_t round, const std::vector<fed::GlobalModel>& models) {
      if ((round + 1) % interval != 0) return;
      for (const auto& model : models) {
        nn::save_checkpoint(
            model.weights,
            (out_dir / "checkpoints" /
             (model.name + "_round" + std::to_string(round) + ".fmw"))
                .string());
      }
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  const auto result =
      fed::run_federation(fed_cfg, split.train, &split.test,
                          initial ? &*initial : nullptr, observer);
  const double total_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();

  write_text_file(out_dir / "round.csv", round_csv(result.history, timings));

  json summary;
  summary["config"] = json::parse(cfg.echo_json());
  summary["dataset"] = json{{"train_size", split.train.size()},
                            {"val_size", split.val.size()},
                            {"test_size", split.test.size()},
                            {"dim", full.dim()},
                            {"classes", full.num_classes()}};

  json jmodels;
  double best_single = 0.0;
  for (const auto& model : result.models) {
    const auto eval = nn::evaluate(model.weights, model.spec, split.test);
    std::vector<int> predictions(split.test.size());
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      const auto probs =
          nn::forward(model.weights, model.spec, split.test.features[i]);
      predictions[i] = static_cast<int>(
          std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    const auto cm = metrics::ConfusionMatrix::from_predictions(
        split.test.labels, predictions, split.test.num_classes());
    const auto report = metrics::macro_report(cm);
    best_single = std::max(best_single, eval.accuracy);
    jmodels[model.name] = json{{"final_loss", eval.loss},
                               {"final_accuracy", eval.accuracy},
                               {"metrics", metrics_to_json(report, split.test.class_names)}};

    std::ostringstream csv;
    metrics::write_metric_csv(report, split.test.class_names, csv);
    write_text_file(out_dir / ("metrics_" + model.name + ".csv"), csv.str());
  }
  summary["models"] = jmodels;
  summary["best_single_accuracy"] = best_single;

  if (cfg.fusion.enabled) {
    const auto fusion =
        evaluate_fusion(result.models, cfg.fusion.models, split.test);
    summary["fusion"] = json{
        {"models", cfg.fusion.models},
        {"accuracy", fusion.accuracy},
        {"mean_conflict", fusion.mean_conflict},
        {"max_conflict", fusion.max_conflict},
        {"metrics", metrics_to_json(fusion.report, split.test.class_names)}};
    std::ostringstream csv;
    metrics::write_metric_csv(fusion.report, split.test.class_names, csv);
    write_text_file(out_dir / "metrics_fused.csv", csv.str());
  }

  if (cfg.output.checkpoint_cadence != "none") {
    fs::create_directories(out_dir / "checkpoints");
    for (const auto& model : result.models) {
      nn::save_checkpoint(model.weights,
                          (out_dir / "checkpoints" / (model.name + ".fmw")).string());
    }
  }

  write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");

  std::cout << "federation finished: " << cfg.federation.rounds
            << " rounds on " << cfg.federation.num_clients << " clients ("
            << fmt(total_ms) << " ms wall)\n";
  for (const auto& model : result.models) {
    const auto eval = nn::evaluate(model.weights, model.spec, split.test);
    std::cout << "  " << model.name << ": test accuracy " << fmt(eval.accuracy)
              << ", loss " << fmt(eval.loss) << "\n";
  }
  if (cfg.fusion.enabled && summary.contains("fusion")) {
    std::cout << "  fused: test accuracy "
              << fmt(summary["fusion"]["accuracy"].get<double>())
              << " (best single " << fmt(best_single) << ")\n";
  }
  std::cout << "artifacts in " << out_dir.string() << "\n";
  return 0;
}

int cmd_scaling(const CommonOptions& opts, std::vector<std::size_t> counts,
                double threshold) {
  auto cfg = load_experiment(opts);
  if (!cfg.dataset.synthetic) {
    throw ConfigError("scaling runs need a synthetic dataset section");
  }
  if (counts.empty()) counts = {10, 15, 20, 25, 30};
  std::sort(counts.begin(), counts.end());

  const auto& base = *cfg.dataset.synthetic;
  const std::size_t total_base = base.classes * base.samples_per_class;
  if (total_base % cfg.federation.num_clients != 0) {
    throw ConfigError("per-client sample count is not integral; adjust "
                      "samples_per_class or clients");
  }
  const std::size_t per_client = total_base / cfg.federation.num_clients;

  // Fixed-size evaluation set so per-round overhead does not scale with K.
  const auto eval_set = data::generate_synthetic(
      base.classes, base.dim, std::max<std::size_t>(50, per_client / 2),
      base.cluster_spread, base.label_noise, base.seed);

  struct Row {
    std::size_t clients;
    double total_ms;
    double mean_round_ms;
  };
  std::vector<Row> rows;

  for (const std::size_t k : counts) {
    const std::size_t total_k = per_client * k;
    if (total_k % base.classes != 0) {
      throw ConfigError("client count " + std::to_string(k) +
                        " does not divide evenly into classes");
    }
    const auto ds = data::generate_synthetic(
        base.classes, base.dim, total_k / base.classes, base.cluster_spread,
        base.label_noise, base.seed);

    auto run_cfg = cfg.federation;
    run_cfg.num_clients = k;

    const auto t0 = std::chrono::steady_clock::now();
    const auto result = fed::run_federation(run_cfg, ds, &eval_set);
    const double total_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
    double round_sum = 0.0;
    for (const auto& r : result.history) round_sum += r.duration_ms;
    rows.push_back(
        Row{k, total_ms, round_sum / static_cast<double>(result.history.size())});
  }

  const fs::path out_dir(cfg.output.dir);
  fs::create_directories(out_dir);

  std::ostringstream csv;
  csv << "clients,rounds,per_client_samples,total_ms,mean_round_ms\n";
  for (const auto& row : rows) {
    csv << row.clients << ',' << cfg.federation.rounds << ',' << per_client
        << ',' << fmt(row.total_ms) << ',' << fmt(row.mean_round_ms) << "\n";
  }
  write_text_file(out_dir / "scaling.csv", csv.str());

  const double ratio = rows.back().total_ms / rows.front().total_ms;
  json report;
  report["host"] = json{
      {"hardware_threads", std::thread::hardware_concurrency()},
      {"threads_used", cfg.federation.threads}};
  report["rounds"] = cfg.federation.rounds;
  report["per_client_samples"] = per_client;
  report["threshold"] = threshold;
  report["ratio"] = ratio;
  report["ratio_between"] =
      json::array({rows.front().clients, rows.back().clients});
  report["sublinear"] = ratio < threshold;
  json jrows = json::array();
  for (const auto& row : rows) {
    jrows.push_back(json{{"clients", row.clients},
                         {"total_ms", row.total_ms},
                         {"mean_round_ms", row.mean_round_ms}});
  }
  report["runs"] = jrows;
  write_text_file(out_dir / "scaling.json", report.dump(2) + "\n");

  std::cout << "clients  total_ms  mean_round_ms\n";
  for (const auto& row : rows) {
    std::printf("%7zu  %8.1f  %13.1f\n", row.clients, row.total_ms,
                row.mean_round_ms);
  }
  std::printf("time(K=%zu) / time(K=%zu) = %.3f (threshold %.2f) -> %s\n",
              rows.back().clients, rows.front().clients, ratio, threshold,
              ratio < threshold ? "sub-linear" : "NOT sub-linear");
  return 0;
}

int cmd_fuse(const std::vector<std::string>& files) {
  std::optional<ds::FrameOfDiscernment> frame;
  std::vector<ds::MassFunction> masses;
  std::vector<std::string> sources;
  for (const auto& path : files) {
    auto file = ds::load_mass_file(path);
    if (!frame) {
      frame = file.frame;
    } else if (!(file.frame == *frame)) {
      throw EvidenceError("frame mismatch in " + path +
                          " (all sources must share one frame)");
    }
    for (auto& record : file.records) {
      sources.push_back(record.source);
      masses.push_back(std::move(record.mass));
    }
  }

  const auto result = ds::combine_all(masses);
  std::cout << "sources:";
  for (const auto& s : sources) std::cout << ' ' << s;
  std::cout << "\nfocal elements:\n";
  for (const auto& [subset, mass] : result.combined.focal()) {
    std::cout << "  " << frame->subset_name(subset) << " = " << fmt(mass)
              << "\n";
  }
  std::cout << "conflict: " << fmt(result.conflict) << "\n";
  const auto decision = ds::decide_max_belief(result);
  std::cout << "decision: " << decision.label << " (belief "
            << fmt(decision.belief) << ")\n";
  return 0;
}

int cmd_latency(const std::string& path) {
  const auto file = lat::load_pipeline_file(path);
  const auto timing = lat::total_time(file.pipeline, file.links);

  std::printf("%-16s %-10s %-14s %12s %10s %12s\n", "node", "placement",
              "stage", "transfer_ms", "exec_ms", "response_ms");
  for (std::size_t i = 0; i < timing.nodes.size(); ++i) {
    const auto& nt = timing.nodes[i];
    std::printf("%-16s %-10s %-14s %12.3f %10.3f %12.3f\n", nt.name.c_str(),
                file.pipeline.nodes[i].placement.str().c_str(),
                lat::stage_name(nt.stage).c_str(), lat::us_to_ms(nt.transfer_us),
                lat::us_to_ms(nt.exec_us), lat::us_to_ms(nt.response_us));
  }
  std::cout << "stage totals (ms):";
  for (const auto stage : {lat::Stage::preprocessing, lat::Stage::processing,
                           lat::Stage::fusion, lat::Stage::other}) {
    std::cout << ' ' << lat::stage_name(stage) << '='
              << fmt(lat::us_to_ms(timing.stage_us[static_cast<std::size_t>(stage)]));
  }
  std::cout << "\ntotal: " << fmt(lat::us_to_ms(timing.total_us)) << " ms\n";
  return 0;
}

int cmd_metrics(const std::string& path, std::size_t classes,
                const std::string& out_dir) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions file: " + path);
  std::vector<int> truth;
  std::vector<int> predicted;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    long t = 0, p = 0;
    if (!(fields >> t >> p)) {
      if (line_no == 1) continue;  // header
      throw ParseError("expected 'true,predicted' integers", line_no);
    }
    if (t < 0 || p < 0) throw ParseError("labels must be nonnegative", line_no);
    truth.push_back(static_cast<int>(t));
    predicted.push_back(static_cast<int>(p));
  }
  if (truth.empty()) throw DataError("no predictions in " + path);

  std::size_t n = classes;
  if (n == 0) {
    for (std::size_t i = 0; i < truth.size(); ++i) {
      n = std::max({n, static_cast<std::size_t>(truth[i]) + 1,
                    static_cast<std::size_t>(predicted[i]) + 1});
    }
  }
  const auto cm = metrics::ConfusionMatrix::from_predictions(truth, predicted, n);
  const auto report = metrics::macro_report(cm);

  std::vector<std::string> names;
  for (std::size_t c = 0; c < n; ++c) names.push_back("class_" + std::to_string(c));
  metrics::write_metric_csv(report, names, std::cout);
  std::cout << "accuracy: " << fmt(report.macro.accuracy) << " (macro averaging)\n";

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    std::ostringstream csv;
    metrics::write_metric_csv(report, names, csv);
    write_text_file(fs::path(out_dir) / "metrics.csv", csv.str());
  }
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"federated learning simulator with evidential decision fusion"};
  app.require_subcommand(1);

  CommonOptions opts;
  app.add_option("--config", opts.config_path, "experiment config (JSON)");
  app.add_option("--out", opts.out_dir, "output directory override");
  std::uint64_t seed_value = 0;
  auto* seed_opt =
      app.add_option("--seed", seed_value, "override the federation seed");
  app.add_option("--threads", opts.threads,
                 "max concurrently training clients (0 = hardware)");
  app.fallthrough();

  auto* federate = app.add_subcommand(
      "federate", "run the configured federation and write reports");
  bool timings = false;
  federate->add_flag("--timings", timings,
                     "write wall-clock durations into round.csv (makes the "
                     "file non-reproducible)");

  auto* scaling = app.add_subcommand(
      "scaling", "re-run the federation over several client counts");
  std::vector<std::size_t> counts;
  double threshold = 3.0;
  scaling->add_option("--counts", counts, "client counts (default 10 15 20 25 30)");
  scaling->add_option("--threshold", threshold,
                      "sub-linearity ratio threshold (host-dependent)");

  auto* fuse = app.add_subcommand(
      "fuse", "combine mass files and print the max-belief decision");
  std::vector<std::string> mass_files;
  fuse->add_option("files", mass_files, "mass files over a common frame")
      ->required()
      ->expected(-1);

  auto* latency = app.add_subcommand(
      "latency", "evaluate a microservice pipeline description");
  std::string pipeline_path;
  latency->add_option("file", pipeline_path, "pipeline JSON file")->required();

  auto* metrics_cmd = app.add_subcommand(
      "metrics", "score a prediction CSV (columns: true,predicted)");
  std::string predictions_path;
  std::size_t classes = 0;
  metrics_cmd->add_option("file", predictions_path, "prediction CSV")->required();
  metrics_cmd->add_option("--classes", classes,
                          "class count (default: inferred from labels)");

  std::vector<std::string> argv_storage = args;
  std::vector<const char*> argv;
  argv.push_back("fedfuse");
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (seed_opt->count() > 0) opts.seed_override = seed_value;

  try {
    if (federate->parsed()) return cmd_federate(opts, timings);
    if (scaling->parsed()) return cmd_scaling(opts, counts, threshold);
    if (fuse->parsed()) return cmd_fuse(mass_files);
    if (latency->parsed()) return cmd_latency(pipeline_path);
    if (metrics_cmd->parsed()) return cmd_metrics(predictions_path, classes, opts.out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no subcommand given\n";
  return 2;
}

}  // namespace fedfuse::cli

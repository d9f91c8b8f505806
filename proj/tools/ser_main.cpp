#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ser/error.hpp"
#include "ser/pipeline.hpp"

namespace {

ser::RunConfig resolve_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
  ser::RunConfig cfg =
      config_path.empty() ? ser::RunConfig::defaults() : ser::load_config(config_path);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      ser::fail("BadConfig", "--set expects key=value, got '" + kv + "'");
    }
    cfg.set_override(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (const char* env_seed = std::getenv("SER_SEED")) {
    cfg.set_override("train.seed", env_seed);
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech emotion recognition pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file (defaults when omitted)");
  app.add_option("--set", overrides, "override a config key, e.g. train.epochs=50");

  // scan
  auto* scan = app.add_subcommand("scan", "build a manifest from a dataset tree");
  ser::pipeline::ScanArgs scan_args;
  scan->add_option("--root", scan_args.root, "dataset root directory");
  scan->add_option("--convention", scan_args.convention, "tess|ravdess|savee|emodb|cremad");
  scan->add_option("--manifest", scan_args.manifest_in, "validate an existing manifest");
  scan->add_option("--out", scan_args.out, "output manifest csv")->required();

  // extract
  auto* extract = app.add_subcommand("extract", "split, augment and extract features");
  ser::pipeline::ExtractArgs ex_args;
  extract->add_option("--manifest", ex_args.manifest, "manifest csv")->required();
  extract->add_option("--out-dir", ex_args.out_dir, "directory for feature csvs")->required();
  extract->add_flag("--augment-all", ex_args.augment_all, "augment every split, not just train");
  extract->add_flag("--no-augment", ex_args.no_augment, "skip augmentation");
  extract->add_option("--jobs", ex_args.jobs, "parallel extraction workers");
  extract->add_option("--dump-wav", ex_args.dump_wav_dir, "write augmented clips here");

  // train
  auto* train = app.add_subcommand("train", "train one model on extracted features");
  ser::pipeline::TrainArgs tr_args;
  std::string model_name = "a";
  train->add_option("--features-dir", tr_args.features_dir, "directory from extract")
      ->required();
  train->add_option("--model", model_name, "a|b|c")->required();
  train->add_option("--out", tr_args.out_dir, "checkpoint directory")->required();

  // ensemble-search
  auto* search = app.add_subcommand("ensemble-search", "grid-search fusion weights");
  ser::pipeline::EnsembleSearchArgs se_args;
  search->add_option("--checkpoints", se_args.checkpoints, "three checkpoint dirs (A B C)")
      ->required()
      ->expected(3);
  search->add_option("--features", se_args.features, "validation feature csv")->required();
  search->add_option("--out", se_args.out, "weights json")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "report metrics on a feature csv");
  ser::pipeline::EvaluateArgs ev_args;
  evaluate->add_option("--checkpoints", ev_args.checkpoints, "one dir, or three with --weights")
      ->required();
  evaluate->add_option("--weights", ev_args.weights, "ensemble weights json");
  evaluate->add_option("--features", ev_args.features, "feature csv")->required();
  evaluate->add_option("--out-dir", ev_args.out_dir, "directory for report.json + confusion.csv")
      ->required();

  // predict
  auto* predict = app.add_subcommand("predict", "classify a single wav file");
  ser::pipeline::PredictArgs pr_args;
  predict->add_option("--checkpoints", pr_args.checkpoints, "one dir, or three with --weights")
      ->required();
  predict->add_option("--weights", pr_args.weights, "ensemble weights json");
  predict->add_option("--wav", pr_args.wav, "input wav file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*scan) {
      const auto s = ser::pipeline::cmd_scan(scan_args);
      std::printf("manifest %s: %zu entries, %zu skipped\n", scan_args.out.c_str(), s.entries,
                  s.skipped);
    } else if (*extract) {
      ex_args.config = resolve_config(config_path, overrides);
      const auto s = ser::pipeline::cmd_extract(ex_args);
      for (const auto& w : s.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      std::printf("features: %zu train, %zu val, %zu test rows (%zu warnings)\n",
                  s.train_rows, s.val_rows, s.test_rows, s.warnings.size());
    } else if (*train) {
      tr_args.config = resolve_config(config_path, overrides);
      if (model_name.size() != 1) ser::fail("BadArgs", "--model must be a, b or c");
      tr_args.model = static_cast<char>(std::toupper(model_name[0]));
      const auto s = ser::pipeline::cmd_train(tr_args);
      std::printf("checkpoint %s: %zu parameters, best val acc %.4f\n",
                  tr_args.out_dir.c_str(), s.param_count, s.best_val_acc);
    } else if (*search) {
      const auto r = ser::pipeline::cmd_ensemble_search(se_args);
      std::printf("weights (%.2f, %.2f, %.2f), val acc %.4f over %d candidates\n",
                  r.weights.w[0], r.weights.w[1], r.weights.w[2], r.val_accuracy,
                  r.candidates_evaluated);
    } else if (*evaluate) {
      const auto r = ser::pipeline::cmd_evaluate(ev_args);
      std::printf("accuracy %.4f macro_f1 %.4f (%lld samples)\n", r.accuracy, r.macro_f1,
                  r.confusion.total());
    } else if (*predict) {
      pr_args.config = resolve_config(config_path, overrides);
      const auto p = ser::pipeline::cmd_predict(pr_args);
      std::printf("label %s\n", p.label.c_str());
      std::printf("probs");
      for (size_t i = 0; i < p.names.size(); ++i) {
        std::printf(" %s:%.6f", p.names[i].c_str(), p.probs[i]);
      }
      std::printf("\n");
    }
  } catch (const ser::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: Internal: %s\n", e.what());
    return 1;
  }
  return 0;
}

#include "ser/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <mutex>
#include <thread>

#include "ser/augment.hpp"
#include "ser/error.hpp"

namespace fs = std::filesystem;

namespace ser::pipeline {

ScanSummary cmd_scan(const ScanArgs& args) {
  if (args.out.empty()) fail("BadArgs", "scan: missing output path");
  Manifest manifest;
  ScanSummary summary;
  if (!args.manifest_in.empty()) {
    manifest = load_manifest(args.manifest_in);
  } else {
    if (args.root.empty() || args.convention.empty()) {
      fail("BadArgs", "scan: need --root with --convention, or --manifest");
    }
    ScanResult res = scan_dataset(args.root, parse_convention(args.convention));
    manifest = std::move(res.manifest);
    summary.skipped = res.skipped.size();
  }
  if (manifest.entries.empty()) fail("EmptyManifest", "scan produced no entries");
  save_manifest(manifest, args.out);
  summary.entries = manifest.size();
  return summary;
}

AudioClip load_clip(const std::string& path, const RunConfig& config) {
  AudioClip clip = decode_wav(path);
  clip = resample(clip, config.sample_rate);
  return fix_length(clip, config.duration_s);
}

namespace {

Split entry_split(const ManifestEntry& e) { return e.split.value_or(Split::Train); }

}  // namespace

ExtractSummary cmd_extract(const ExtractArgs& args) {
  args.config.validate();
  if (args.out_dir.empty()) fail("BadArgs", "extract: missing output directory");
  Manifest manifest = load_manifest(args.manifest);

  // Attach splits: explicit tags win, otherwise a seeded stratified plan.
  if (!manifest.has_splits()) {
    const SplitPlan plan = make_split(manifest, args.config.train.seed);
    for (int i : plan.train_idx) manifest.entries[i].split = Split::Train;
    for (int i : plan.val_idx) manifest.entries[i].split = Split::Val;
    for (int i : plan.test_idx) manifest.entries[i].split = Split::Test;
  }

  Manifest expanded = manifest;
  if (!args.no_augment) {
    if (args.config.augment.empty()) fail("EmptySpecs", "config lists no augmentations");
    expanded = expand(manifest, args.config.augment,
                      args.augment_all ? AugmentScope::All : AugmentScope::TrainOnly);
  }

  if (!args.dump_wav_dir.empty()) fs::create_directories(args.dump_wav_dir);
  fs::create_directories(args.out_dir);

  const size_t n = expanded.size();
  std::vector<FeatureRow> rows(n);
  std::vector<char> ok(n, 0);
  std::vector<std::string> warnings;
  std::mutex warn_mutex;
  const FrameParams fp = args.config.frame_params();

  const int jobs = std::max(1, args.jobs);
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      const ManifestEntry& e = expanded.entries[i];
      try {
        AudioClip clip = load_clip(e.path, args.config);
        std::string origin = e.path;
        if (!e.augment_tag.empty()) {
          AugmentSpec spec;
          const auto c1 = e.augment_tag.find(':');
          const auto c2 = e.augment_tag.rfind(':');
          spec.kind = parse_augment_kind(e.augment_tag.substr(0, c1));
          spec.param = std::stod(e.augment_tag.substr(c1 + 1, c2 - c1 - 1));
          spec.seed = std::stoull(e.augment_tag.substr(c2 + 1));
          clip = apply_augment(clip, spec);
          origin += "|" + e.augment_tag;
          if (!args.dump_wav_dir.empty()) {
            std::string name = fs::path(e.path).stem().string() + "_" + e.augment_tag + ".wav";
            std::replace(name.begin(), name.end(), ':', '_');
            write_wav_pcm16(clip, (fs::path(args.dump_wav_dir) / name).string());
          }
        }
        rows[i] = FeatureRow{origin, e.label, extract(clip, fp)};
        ok[i] = 1;
      } catch (const Error& err) {
        std::lock_guard<std::mutex> lock(warn_mutex);
        warnings.push_back(e.path + ": " + err.what());
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<FeatureRow> train, val, test;
  for (size_t i = 0; i < n; ++i) {
    if (!ok[i]) continue;
    switch (entry_split(expanded.entries[i])) {
      case Split::Train: train.push_back(std::move(rows[i])); break;
      case Split::Val: val.push_back(std::move(rows[i])); break;
      case Split::Test: test.push_back(std::move(rows[i])); break;
    }
  }
  write_feature_csv((fs::path(args.out_dir) / "features_train.csv").string(), train);
  write_feature_csv((fs::path(args.out_dir) / "features_val.csv").string(), val);
  write_feature_csv((fs::path(args.out_dir) / "features_test.csv").string(), test);

  ExtractSummary summary;
  summary.train_rows = train.size();
  summary.val_rows = val.size();
  summary.test_rows = test.size();
  summary.warnings = std::move(warnings);
  return summary;
}

namespace {

struct LabeledMatrix {
  std::vector<std::vector<double>> x;
  std::vector<int> y;
};

LabeledMatrix to_matrix(const std::vector<FeatureRow>& rows, const LabelMap& labels) {
  LabeledMatrix m;
  for (const auto& r : rows) {
    m.x.push_back(r.values);
    m.y.push_back(labels.id_of(r.label));
  }
  return m;
}

}  // namespace

TrainSummary cmd_train(const TrainArgs& args) {
  args.config.validate();
  if (args.out_dir.empty()) fail("BadArgs", "train: missing output directory");
  const auto train_rows =
      read_feature_csv((fs::path(args.features_dir) / "features_train.csv").string());
  const auto val_rows =
      read_feature_csv((fs::path(args.features_dir) / "features_val.csv").string());

  std::vector<std::string> names;
  for (const auto& r : train_rows) names.push_back(r.label);
  for (const auto& r : val_rows) names.push_back(r.label);
  const LabelMap labels = LabelMap::from_names(std::move(names));

  LabeledMatrix train = to_matrix(train_rows, labels);
  LabeledMatrix val = to_matrix(val_rows, labels);

  const Normalizer norm = fit_normalizer(train.x);
  for (auto& row : train.x) row = ser::apply(norm, row);
  for (auto& row : val.x) row = ser::apply(norm, row);

  BuildOptions opts;
  opts.width_scale = args.config.train.width_scale;
  opts.l2 = args.config.train.l2;
  const ModelSpec spec = build(args.model, labels.size(), opts);

  FitConfig fit_cfg;
  fit_cfg.epochs = args.config.train.epochs;
  fit_cfg.batch = args.config.train.batch;
  fit_cfg.lr = args.config.train.lr;
  fit_cfg.seed = args.config.train.seed;

  History history;
  const Checkpoint ck =
      fit(spec, train.x, train.y, val.x, val.y, fit_cfg, norm, labels, &history);
  save(ck, args.out_dir);
  write_history_csv(history, (fs::path(args.out_dir) / "history.csv").string());

  TrainSummary summary;
  summary.param_count = ck.weights.size();
  for (const auto& e : history.epochs) {
    summary.best_val_acc = std::max(summary.best_val_acc, e.val_acc);
    summary.final_train_loss = e.train_loss;
  }
  return summary;
}

namespace {

// Predictions of one checkpoint over feature rows, as double rows.
std::vector<std::vector<double>> checkpoint_probs(const Checkpoint& ck,
                                                  const std::vector<FeatureRow>& rows) {
  std::vector<std::vector<double>> raw;
  raw.reserve(rows.size());
  for (const auto& r : rows) raw.push_back(r.values);
  const auto probs = predict_batch(ck, raw);
  std::vector<std::vector<double>> out(probs.size());
  for (size_t i = 0; i < probs.size(); ++i) out[i].assign(probs[i].begin(), probs[i].end());
  return out;
}

void require_same_labels(const Checkpoint& a, const Checkpoint& b) {
  if (a.labels.names != b.labels.names) {
    fail("LabelMismatch", "checkpoints were trained with different label maps");
  }
}

}  // namespace

GridSearchResult cmd_ensemble_search(const EnsembleSearchArgs& args) {
  if (args.checkpoints.size() != 3) {
    fail("BadArgs", "ensemble-search: exactly three checkpoints required");
  }
  const Checkpoint ck_a = load(args.checkpoints[0]);
  const Checkpoint ck_b = load(args.checkpoints[1]);
  const Checkpoint ck_c = load(args.checkpoints[2]);
  require_same_labels(ck_a, ck_b);
  require_same_labels(ck_a, ck_c);

  const auto rows = read_feature_csv(args.features);
  std::vector<int> labels;
  for (const auto& r : rows) labels.push_back(ck_a.labels.id_of(r.label));

  const GridSearchResult result =
      grid_search(checkpoint_probs(ck_a, rows), checkpoint_probs(ck_b, rows),
                  checkpoint_probs(ck_c, rows), labels, args.step);
  if (!args.out.empty()) save_weights(result.weights, args.out);
  return result;
}

EvalReport cmd_evaluate(const EvaluateArgs& args) {
  const auto rows = read_feature_csv(args.features);

  EvalReport report;
  if (args.checkpoints.size() == 1) {
    const Checkpoint ck = load(args.checkpoints[0]);
    std::vector<int> labels;
    for (const auto& r : rows) labels.push_back(ck.labels.id_of(r.label));
    const auto probs = checkpoint_probs(ck, rows);
    std::vector<int> preds(probs.size());
    for (size_t i = 0; i < probs.size(); ++i) {
      preds[i] = static_cast<int>(std::max_element(probs[i].begin(), probs[i].end()) -
                                  probs[i].begin());
    }
    report = derive(confusion(labels, preds, ck.labels.size()), ck.labels.names);
  } else if (args.checkpoints.size() == 3) {
    if (args.weights.empty()) {
      fail("BadArgs", "evaluate: three checkpoints need --weights");
    }
    const Checkpoint ck_a = load(args.checkpoints[0]);
    const Checkpoint ck_b = load(args.checkpoints[1]);
    const Checkpoint ck_c = load(args.checkpoints[2]);
    require_same_labels(ck_a, ck_b);
    require_same_labels(ck_a, ck_c);
    const EnsembleWeights w = load_weights(args.weights);
    std::vector<int> labels;
    for (const auto& r : rows) labels.push_back(ck_a.labels.id_of(r.label));
    report = evaluate_ensemble(checkpoint_probs(ck_a, rows), checkpoint_probs(ck_b, rows),
                               checkpoint_probs(ck_c, rows), labels, w, ck_a.labels.names);
  } else {
    fail("BadArgs", "evaluate: pass one checkpoint, or three with --weights");
  }

  if (!args.out_dir.empty()) {
    fs::create_directories(args.out_dir);
    emit(report, (fs::path(args.out_dir) / "report.json").string(), "json");
    emit(report, (fs::path(args.out_dir) / "confusion.csv").string(), "csv");
  }
  return report;
}

Prediction cmd_predict(const PredictArgs& args) {
  args.config.validate();
  const AudioClip clip = load_clip(args.wav, args.config);
  const std::vector<double> features = extract(clip, args.config.frame_params());

  Prediction out;
  if (args.checkpoints.size() == 1) {
    const Checkpoint ck = load(args.checkpoints[0]);
    const auto probs = predict(ck, features);
    out.names = ck.labels.names;
    out.probs.assign(probs.begin(), probs.end());
  } else if (args.checkpoints.size() == 3) {
    if (args.weights.empty()) fail("BadArgs", "predict: three checkpoints need --weights");
    const Checkpoint ck_a = load(args.checkpoints[0]);
    const Checkpoint ck_b = load(args.checkpoints[1]);
    const Checkpoint ck_c = load(args.checkpoints[2]);
    require_same_labels(ck_a, ck_b);
    require_same_labels(ck_a, ck_c);
    const EnsembleWeights w = load_weights(args.weights);
    auto to_d = [](const std::vector<float>& v) {
      return std::vector<double>(v.begin(), v.end());
    };
    const Fused fused = fuse(to_d(predict(ck_a, features)), to_d(predict(ck_b, features)),
                             to_d(predict(ck_c, features)), w);
    out.names = ck_a.labels.names;
    out.probs = fused.probs;
  } else {
    fail("BadArgs", "predict: pass one checkpoint, or three with --weights");
  }

  const auto arg = std::max_element(out.probs.begin(), out.probs.end()) - out.probs.begin();
  out.label = out.names[static_cast<size_t>(arg)];
  return out;
}

}  // namespace ser::pipeline

#pragma once

#include <string>
#include <vector>

#include "ser/config.hpp"
#include "ser/dataset.hpp"
#include "ser/ensemble.hpp"
#include "ser/metrics.hpp"
#include "ser/model.hpp"

// Command bodies shared by the CLI front end and the integration tests.
namespace ser::pipeline {

struct ScanArgs {
  std::string root;        // with convention, or
  std::string convention;
  std::string manifest_in;  // an existing manifest to validate and rewrite
  std::string out;
};

struct ScanSummary {
  size_t entries = 0;
  size_t skipped = 0;
};

ScanSummary cmd_scan(const ScanArgs& args);

struct ExtractArgs {
  std::string manifest;
  RunConfig config;
  std::string out_dir;
  bool augment_all = false;  // also augment val/test entries
  bool no_augment = false;
  int jobs = 1;
  std::string dump_wav_dir;  // when set, augmented clips are written here
};

struct ExtractSummary {
  size_t train_rows = 0, val_rows = 0, test_rows = 0;
  std::vector<std::string> warnings;  // per-file decode failures
};

// Splits (honoring manifest tags, otherwise a seeded stratified plan),
// augments eligible entries, extracts 155-dim vectors and writes
// features_{train,val,test}.csv under out_dir.
ExtractSummary cmd_extract(const ExtractArgs& args);

struct TrainArgs {
  std::string features_dir;  // holding features_train.csv and features_val.csv
  char model = 'A';
  RunConfig config;
  std::string out_dir;  // checkpoint directory; history.csv lands inside
};

struct TrainSummary {
  double best_val_acc = 0;
  double final_train_loss = 0;
  size_t param_count = 0;
};

TrainSummary cmd_train(const TrainArgs& args);

struct EnsembleSearchArgs {
  std::vector<std::string> checkpoints;  // exactly 3: A, B, C
  std::string features;                  // validation feature csv
  double step = 0.1;
  std::string out;  // weights json
};

GridSearchResult cmd_ensemble_search(const EnsembleSearchArgs& args);

struct EvaluateArgs {
  std::vector<std::string> checkpoints;  // one, or three with weights
  std::string weights;                   // required with three checkpoints
  std::string features;
  std::string out_dir;  // report.json + confusion.csv
};

EvalReport cmd_evaluate(const EvaluateArgs& args);

struct PredictArgs {
  std::vector<std::string> checkpoints;  // one, or three with weights
  std::string weights;
  std::string wav;
  RunConfig config;
};

struct Prediction {
  std::string label;
  std::vector<std::string> names;
  std::vector<double> probs;
};

Prediction cmd_predict(const PredictArgs& args);

// Loads a wav and applies the preprocessing chain of the config.
AudioClip load_clip(const std::string& path, const RunConfig& config);

}  // namespace ser::pipeline

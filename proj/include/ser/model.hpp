#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ser/dataset.hpp"
#include "ser/features.hpp"
#include "ser/nn/network.hpp"

namespace ser {

// Knobs for desk-scale runs; defaults reproduce the full-width stacks.
struct BuildOptions {
  double width_scale = 1.0;  // multiplies filter counts and unit widths
  double l2 = 0.01;
  bool dropout = true;  // false builds the stack with all dropout rates 0
  int dilation = 1;
};

struct ModelSpec {
  char id = 'A';  // A = conv only, B = +LSTM, C = +GRU
  int num_classes = 0;
  int input_dim = kFeatureDim;
  std::vector<nn::LayerSpec> layers;
};

// Assembles model A, B or C for K classes. Errors: BadArgs on K < 2.
ModelSpec build(char id, int num_classes, const BuildOptions& opts = {});

struct FitConfig {
  int epochs = 1000;
  int batch = 32;
  double lr = 1e-3;
  uint64_t seed = 42;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0, train_acc = 0;
  double val_loss = 0, val_acc = 0;
};

struct History {
  std::vector<EpochStats> epochs;
};

void write_history_csv(const History& h, const std::string& path);

// Trained model plus everything predict needs: label order, feature
// normalization and the flat little-endian f32 weight blob.
struct Checkpoint {
  int format_version = 1;
  ModelSpec spec;
  LabelMap labels;
  Normalizer normalizer;
  uint64_t seed = 0;
  std::vector<float> weights;
};

// Mini-batch Adam training with per-epoch shuffling under seed; retains the
// weights of the best validation accuracy (final weights when val is empty).
// Inputs must already be normalized.
Checkpoint fit(const ModelSpec& spec, const std::vector<std::vector<double>>& train_x,
               const std::vector<int>& train_y, const std::vector<std::vector<double>>& val_x,
               const std::vector<int>& val_y, const FitConfig& cfg, const Normalizer& norm,
               const LabelMap& labels, History* history = nullptr);

// Applies the stored normalizer, runs infer mode, returns K probabilities.
std::vector<float> predict(const Checkpoint& ck, const std::vector<double>& raw_vector);

// Chunked batch inference; identical per-row results to predict().
std::vector<std::vector<float>> predict_batch(const Checkpoint& ck,
                                              const std::vector<std::vector<double>>& raw);

// Checkpoint directory: manifest.json + weights.bin.
void save(const Checkpoint& ck, const std::string& dir);
Checkpoint load(const std::string& dir);

// Number of f32 scalars the spec's network serializes to.
size_t checkpoint_param_count(const ModelSpec& spec);

}  // namespace ser

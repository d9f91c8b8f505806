#pragma once

#include <string>
#include <vector>

#include "ser/augment.hpp"
#include "ser/dsp.hpp"

namespace ser {

struct TrainConfig {
  int epochs = 1000;
  int batch = 32;
  double lr = 1e-3;
  double l2 = 0.01;
  uint64_t seed = 42;
  double width_scale = 1.0;
};

struct EnsembleConfig {
  double step = 0.1;
};

// Every tunable of the pipeline; serialized as JSON, overridable per key
// with --set, validated before any command runs.
struct RunConfig {
  int sample_rate = 44100;
  double duration_s = 3.0;
  double frame_win_ms = 25.0;
  double frame_hop_ms = 10.0;
  double mel_constant = 2595.0;
  std::vector<AugmentSpec> augment;
  TrainConfig train;
  EnsembleConfig ensemble;

  static RunConfig defaults();

  FrameParams frame_params() const;

  // Errors: BadConfig naming the offending field path.
  void validate() const;

  std::string to_json_string() const;
  static RunConfig from_json_string(const std::string& text);

  // Dotted scalar override, e.g. "train.epochs=50".
  void set_override(const std::string& key, const std::string& value);
};

RunConfig load_config(const std::string& path);
void save_config(const RunConfig& cfg, const std::string& path);

}  // namespace ser

#pragma once

#include <string>
#include <vector>

#include "ser/audio.hpp"
#include "ser/dsp.hpp"

namespace ser {

inline constexpr int kMfccCount = 13;
inline constexpr int kChromaBins = 12;
inline constexpr int kMelBands = 128;
inline constexpr int kFeatureDim = kMfccCount + kChromaBins + kMelBands + 2;  // 155

inline constexpr int kMfccFilterCount = 26;
inline constexpr double kLogFloor = 1e-10;  // silence floor before any log

// One extracted clip: 155 values ordered
// [mfcc0..mfcc12, chroma0..chroma11, lms0..lms127, zcr, rms].
struct FeatureVector {
  std::vector<double> values;
  int label = -1;      // class id under the active LabelMap
  std::string origin;  // source path, plus augment tag when synthesized
};

// Per-frame 26-filter log mel energies -> orthonormal DCT-II, coefficients
// 0..12, averaged over frames.
std::vector<double> mfcc_mean(const AudioClip& clip, const FrameParams& params);

// 128-band log mel power spectrogram averaged over frames.
std::vector<double> logmel_mean(const AudioClip& clip, const FrameParams& params);

// Spectral energy folded into 12 pitch classes (C = 0), each frame
// max-normalized, averaged over frames. Bins below 27.5 Hz are ignored.
std::vector<double> chroma_mean(const AudioClip& clip, const FrameParams& params);

// Fraction of adjacent-sample sign changes per frame, averaged over frames.
double zcr_mean(const AudioClip& clip, const FrameParams& params);

// Root mean square per frame, averaged over frames.
double rms_mean(const AudioClip& clip, const FrameParams& params);

// All five feature groups concatenated in the declared order; length 155.
std::vector<double> extract(const AudioClip& clip, const FrameParams& params);

// Per-dimension z-score statistics fitted on the training split.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> std;  // elementwise >= 1e-8
};

// Population statistics; needs at least two vectors.
Normalizer fit_normalizer(const std::vector<std::vector<double>>& train_vectors);

std::vector<double> apply(const Normalizer& norm, const std::vector<double>& vec);

// Feature cache CSV: header origin,label,f0..f154, label is the emotion name.
struct FeatureRow {
  std::string origin;
  std::string label;
  std::vector<double> values;
};

void write_feature_csv(const std::string& path, const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> read_feature_csv(const std::string& path);

}  // namespace ser

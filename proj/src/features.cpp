#include "ser/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ser/error.hpp"

namespace ser {

namespace {

std::vector<double> mfcc_from_spec(const Spectrogram& spec, int rate, int nfft,
                                   double mel_constant) {
  const MelFilterbank fb = MelFilterbank::create(kMfccFilterCount, nfft, rate, mel_constant);
  std::vector<double> mean(kMfccCount, 0.0);
  std::vector<double> power(spec.bins), log_e(kMfccFilterCount);
  for (int t = 0; t < spec.frames; ++t) {
    for (int b = 0; b < spec.bins; ++b) power[b] = spec.at(t, b) * spec.at(t, b);
    std::vector<double> e = fb.apply_power(power.data());
    for (int m = 0; m < kMfccFilterCount; ++m) log_e[m] = std::log(std::max(e[m], kLogFloor));
    std::vector<double> c = dct2_orthonormal(log_e, kMfccCount);
    for (int j = 0; j < kMfccCount; ++j) mean[j] += c[j];
  }
  for (double& v : mean) v /= spec.frames;
  return mean;
}

std::vector<double> logmel_from_spec(const Spectrogram& spec, int rate, int nfft,
                                     double mel_constant) {
  const MelFilterbank fb = MelFilterbank::create(kMelBands, nfft, rate, mel_constant);
  std::vector<double> mean(kMelBands, 0.0);
  std::vector<double> power(spec.bins);
  for (int t = 0; t < spec.frames; ++t) {
    for (int b = 0; b < spec.bins; ++b) power[b] = spec.at(t, b) * spec.at(t, b);
    std::vector<double> e = fb.apply_power(power.data());
    for (int m = 0; m < kMelBands; ++m) mean[m] += std::log(std::max(e[m], kLogFloor));
  }
  for (double& v : mean) v /= spec.frames;
  return mean;
}

std::vector<double> chroma_from_spec(const Spectrogram& spec, int rate, int nfft) {
  // bin -> pitch class, computed once; -1 marks ignored low-frequency bins
  std::vector<int> pitch_class(spec.bins, -1);
  for (int b = 0; b < spec.bins; ++b) {
    const double f = static_cast<double>(b) * rate / nfft;
    if (f < 27.5) continue;
    const auto cls = static_cast<long>(std::lround(12.0 * std::log2(f / 440.0))) + 9;
    pitch_class[b] = static_cast<int>(((cls % 12) + 12) % 12);
  }

  std::vector<double> mean(kChromaBins, 0.0);
  std::vector<double> frame(kChromaBins);
  for (int t = 0; t < spec.frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    for (int b = 0; b < spec.bins; ++b) {
      if (pitch_class[b] < 0) continue;
      frame[pitch_class[b]] += spec.at(t, b) * spec.at(t, b);
    }
    const double peak = *std::max_element(frame.begin(), frame.end());
    if (peak > 1e-12) {
      for (int c = 0; c < kChromaBins; ++c) mean[c] += frame[c] / peak;
    }
  }
  for (double& v : mean) v /= spec.frames;
  return mean;
}

struct TimeStats {
  double zcr = 0.0;
  double rms = 0.0;
};

TimeStats time_domain_means(const AudioClip& clip, const FrameParams& params) {
  const int win = params.win_samples(clip.sample_rate);
  const int hop = params.hop_samples(clip.sample_rate);
  if (clip.length() < win) {
    fail("TooShort", "clip shorter than one analysis window");
  }
  const int frames = (clip.length() - win) / hop + 1;
  TimeStats st;
  for (int t = 0; t < frames; ++t) {
    const double* x = clip.samples.data() + static_cast<size_t>(t) * hop;
    int crossings = 0;
    double energy = 0.0;
    energy += x[0] * x[0];
    for (int i = 1; i < win; ++i) {
      if (x[i] * x[i - 1] < 0.0) ++crossings;
      energy += x[i] * x[i];
    }
    st.zcr += static_cast<double>(crossings) / (win - 1);
    st.rms += std::sqrt(energy / win);
  }
  st.zcr /= frames;
  st.rms /= frames;
  return st;
}

}  // namespace

std::vector<double> mfcc_mean(const AudioClip& clip, const FrameParams& params) {
  const Spectrogram spec = stft_magnitude(clip, params);
  return mfcc_from_spec(spec, clip.sample_rate, params.fft_size(clip.sample_rate),
                        params.mel_constant);
}

std::vector<double> logmel_mean(const AudioClip& clip, const FrameParams& params) {
  const Spectrogram spec = stft_magnitude(clip, params);
  return logmel_from_spec(spec, clip.sample_rate, params.fft_size(clip.sample_rate),
                          params.mel_constant);
}

std::vector<double> chroma_mean(const AudioClip& clip, const FrameParams& params) {
  const Spectrogram spec = stft_magnitude(clip, params);
  return chroma_from_spec(spec, clip.sample_rate, params.fft_size(clip.sample_rate));
}

double zcr_mean(const AudioClip& clip, const FrameParams& params) {
  return time_domain_means(clip, params).zcr;
}

double rms_mean(const AudioClip& clip, const FrameParams& params) {
  return time_domain_means(clip, params).rms;
}

std::vector<double> extract(const AudioClip& clip, const FrameParams& params) {
  const int rate = clip.sample_rate;
  const int nfft = params.fft_size(rate);
  const Spectrogram spec = stft_magnitude(clip, params);  // shared by all spectral paths

  std::vector<double> out;
  out.reserve(kFeatureDim);
  const std::vector<double> mfcc = mfcc_from_spec(spec, rate, nfft, params.mel_constant);
  const std::vector<double> chroma = chroma_from_spec(spec, rate, nfft);
  const std::vector<double> lms = logmel_from_spec(spec, rate, nfft, params.mel_constant);
  const TimeStats st = time_domain_means(clip, params);

  out.insert(out.end(), mfcc.begin(), mfcc.end());
  out.insert(out.end(), chroma.begin(), chroma.end());
  out.insert(out.end(), lms.begin(), lms.end());
  out.push_back(st.zcr);
  out.push_back(st.rms);
  return out;
}

Normalizer fit_normalizer(const std::vector<std::vector<double>>& train_vectors) {
  if (train_vectors.size() < 2) {
    fail("TooFewSamples", "normalizer needs at least two training vectors");
  }
  const size_t dim = train_vectors[0].size();
  Normalizer norm;
  norm.mean.assign(dim, 0.0);
  norm.std.assign(dim, 0.0);
  for (const auto& v : train_vectors) {
    if (v.size() != dim) fail("ShapeMismatch", "inconsistent feature dimensions");
    for (size_t i = 0; i < dim; ++i) norm.mean[i] += v[i];
  }
  const double n = static_cast<double>(train_vectors.size());
  for (size_t i = 0; i < dim; ++i) norm.mean[i] /= n;
  for (const auto& v : train_vectors) {
    for (size_t i = 0; i < dim; ++i) {
      const double d = v[i] - norm.mean[i];
      norm.std[i] += d * d;
    }
  }
  for (size_t i = 0; i < dim; ++i) {
    norm.std[i] = std::max(std::sqrt(norm.std[i] / n), 1e-8);  // population variance
  }
  return norm;
}

std::vector<double> apply(const Normalizer& norm, const std::vector<double>& vec) {
  if (vec.size() != norm.mean.size()) {
    fail("ShapeMismatch", "vector length " + std::to_string(vec.size()) +
                              " != normalizer dimension " + std::to_string(norm.mean.size()));
  }
  std::vector<double> out(vec.size());
  for (size_t i = 0; i < vec.size(); ++i) out[i] = (vec[i] - norm.mean[i]) / norm.std[i];
  return out;
}

void write_feature_csv(const std::string& path, const std::vector<FeatureRow>& rows) {
  std::ofstream out(path);
  if (!out) fail("UnwritablePath", "cannot write " + path);
  out << "origin,label";
  for (int i = 0; i < kFeatureDim; ++i) out << ",f" << i;
  out << "\n";
  char buf[32];
  for (const auto& r : rows) {
    if (r.values.size() != kFeatureDim) {
      fail("ShapeMismatch", "feature row of length " + std::to_string(r.values.size()));
    }
    out << r.origin << ',' << r.label;
    for (double v : r.values) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    out << "\n";
  }
}

std::vector<FeatureRow> read_feature_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("MissingFile", "cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) fail("MalformedCsv", path + ": empty file");

  std::vector<FeatureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    FeatureRow row;
    std::stringstream ss(line);
    std::string field;
    if (!std::getline(ss, row.origin, ',') || !std::getline(ss, row.label, ',')) {
      fail("MalformedCsv", path + ": short row");
    }
    while (std::getline(ss, field, ',')) row.values.push_back(std::stod(field));
    if (row.values.size() != kFeatureDim) {
      fail("MalformedCsv", path + ": expected " + std::to_string(kFeatureDim) +
                               " features, got " + std::to_string(row.values.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail("EmptyManifest", path + ": no feature rows");
  return rows;
}

}  // namespace ser

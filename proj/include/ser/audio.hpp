#pragma once

#include <string>
#include <vector>

namespace ser {

// Mono audio buffer. Samples live in [-1, 1]; decode and every transform
// keep that invariant.
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 0;
  std::string source;  // originating path, empty for synthetic clips

  int length() const { return static_cast<int>(samples.size()); }
  double duration_s() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// Reads a RIFF/WAVE file. Accepts PCM 16-bit and IEEE float 32-bit with one
// or two channels; stereo frames are averaged to mono. 16-bit values are
// scaled by 1/32768.
// Errors: MalformedWav, UnsupportedEncoding, ZeroFrames.
AudioClip decode_wav(const std::string& path);

// Writes mono PCM 16-bit. Used by the optional augmentation dump.
void write_wav_pcm16(const AudioClip& clip, const std::string& path);

// Resamples x onto the grid out[i] = x(i * step) with linear interpolation
// between neighbours; out length = round(len / step).
std::vector<double> resample_ratio(const std::vector<double>& x, double step);

// Linear-interpolation resampler; output length = round(len * target / source).
// target_rate == sample_rate returns the samples bit-identically.
AudioClip resample(const AudioClip& clip, int target_rate);

// Forces the clip to round(duration_s * rate) samples: zero-pads the tail of
// shorter clips, truncates the tail of longer ones.
AudioClip fix_length(const AudioClip& clip, double duration_s);

}  // namespace ser

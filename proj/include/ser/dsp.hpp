#pragma once

#include <complex>
#include <vector>

#include "ser/audio.hpp"

namespace ser {

enum class WindowKind { Hamming, Rectangular };

// Short-time framing parameters shared by every per-frame feature.
// fft_size is derived: next power of two >= window samples.
struct FrameParams {
  double win_ms = 25.0;
  double hop_ms = 10.0;
  WindowKind window = WindowKind::Hamming;
  double mel_constant = 2595.0;  // break constant of the mel map, configurable

  int win_samples(int rate) const;
  int hop_samples(int rate) const;
  int fft_size(int rate) const;
};

int next_pow2(int n);

// Hamming: 0.54 - 0.46*cos(2*pi*n/(N-1)); rectangular: all ones.
std::vector<double> make_window(WindowKind kind, int n);

// In-place radix-2 decimation-in-time FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);

// Frame-major magnitude spectrogram, bins = fft_size/2 + 1.
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<double> mag;

  double& at(int f, int b) { return mag[static_cast<size_t>(f) * bins + b]; }
  double at(int f, int b) const { return mag[static_cast<size_t>(f) * bins + b]; }
};

// Frame t starts at t*hop; each frame is windowed, zero-padded to fft_size
// and transformed; magnitudes of the one-sided spectrum are returned.
// Errors: TooShort when the clip holds less than one window.
Spectrogram stft_magnitude(const AudioClip& clip, const FrameParams& params);

double hz_to_mel(double f, double mel_constant = 2595.0);
double mel_to_hz(double mel, double mel_constant = 2595.0);

// Triangular mel filterbank over the one-sided FFT bins, peak weight 1,
// spanning 0 Hz .. rate/2.
struct MelFilterbank {
  int n_filters = 0;
  int bins = 0;
  std::vector<double> weights;  // n_filters x bins

  double at(int m, int b) const { return weights[static_cast<size_t>(m) * bins + b]; }

  static MelFilterbank create(int n_filters, int fft_size, int rate,
                              double mel_constant = 2595.0);

  // energies[m] = sum_b weights[m][b] * power[b]
  std::vector<double> apply_power(const double* power_bins) const;
};

// Orthonormal DCT-II of x, keeping the first n_keep coefficients.
std::vector<double> dct2_orthonormal(const std::vector<double>& x, int n_keep);

}  // namespace ser

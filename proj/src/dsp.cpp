#include "ser/dsp.hpp"

#include <cmath>

#include "ser/error.hpp"

namespace ser {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

int FrameParams::win_samples(int rate) const {
  return static_cast<int>(std::lround(win_ms * rate / 1000.0));
}

int FrameParams::hop_samples(int rate) const {
  return static_cast<int>(std::lround(hop_ms * rate / 1000.0));
}

int FrameParams::fft_size(int rate) const { return next_pow2(win_samples(rate)); }

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<double> make_window(WindowKind kind, int n) {
  std::vector<double> w(n, 1.0);
  if (kind == WindowKind::Hamming && n > 1) {
    for (int i = 0; i < n; ++i) w[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * i / (n - 1));
  }
  return w;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) fail("BadArgs", "fft size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

Spectrogram stft_magnitude(const AudioClip& clip, const FrameParams& params) {
  const int rate = clip.sample_rate;
  const int win = params.win_samples(rate);
  const int hop = params.hop_samples(rate);
  const int nfft = params.fft_size(rate);
  if (win <= 0 || hop <= 0) fail("BadArgs", "stft: non-positive window or hop");
  if (clip.length() < win) {
    fail("TooShort", "clip of " + std::to_string(clip.length()) +
                         " samples is shorter than one window (" + std::to_string(win) + ")");
  }

  const std::vector<double> window = make_window(params.window, win);
  const int frames = (clip.length() - win) / hop + 1;
  const int bins = nfft / 2 + 1;

  Spectrogram spec;
  spec.frames = frames;
  spec.bins = bins;
  spec.mag.assign(static_cast<size_t>(frames) * bins, 0.0);

  std::vector<std::complex<double>> buf(nfft);
  for (int t = 0; t < frames; ++t) {
    const double* x = clip.samples.data() + static_cast<size_t>(t) * hop;
    for (int i = 0; i < win; ++i) buf[i] = std::complex<double>(x[i] * window[i], 0.0);
    for (int i = win; i < nfft; ++i) buf[i] = {0.0, 0.0};
    fft_inplace(buf);
    for (int b = 0; b < bins; ++b) spec.at(t, b) = std::abs(buf[b]);
  }
  return spec;
}

double hz_to_mel(double f, double mel_constant) {
  return mel_constant * std::log10(1.0 + f / 700.0);
}

double mel_to_hz(double mel, double mel_constant) {
  return 700.0 * (std::pow(10.0, mel / mel_constant) - 1.0);
}

MelFilterbank MelFilterbank::create(int n_filters, int fft_size, int rate,
                                    double mel_constant) {
  if (n_filters < 1) fail("BadArgs", "mel filterbank needs at least one filter");
  MelFilterbank fb;
  fb.n_filters = n_filters;
  fb.bins = fft_size / 2 + 1;
  fb.weights.assign(static_cast<size_t>(n_filters) * fb.bins, 0.0);

  const double f_max = rate / 2.0;
  const double mel_max = hz_to_mel(f_max, mel_constant);
  // n_filters + 2 edge points uniformly spaced on the mel axis
  std::vector<double> edges_hz(n_filters + 2);
  for (int i = 0; i < n_filters + 2; ++i) {
    edges_hz[i] = mel_to_hz(mel_max * i / (n_filters + 1), mel_constant);
  }

  for (int m = 0; m < n_filters; ++m) {
    const double left = edges_hz[m], center = edges_hz[m + 1], right = edges_hz[m + 2];
    double* row = fb.weights.data() + static_cast<size_t>(m) * fb.bins;
    double peak = 0.0;
    for (int b = 0; b < fb.bins; ++b) {
      const double f = static_cast<double>(b) * rate / fft_size;
      double w = 0.0;
      if (f > left && f < right) {
        w = (f <= center) ? (f - left) / (center - left) : (right - f) / (right - center);
      }
      row[b] = w;
      peak = std::max(peak, w);
    }
    // Rescale so the sampled peak is exactly 1; narrow filters otherwise top
    // out below 1 when no bin lands on the triangle apex.
    if (peak > 0.0) {
      for (int b = 0; b < fb.bins; ++b) row[b] /= peak;
    }
  }
  return fb;
}

std::vector<double> MelFilterbank::apply_power(const double* power_bins) const {
  std::vector<double> out(n_filters, 0.0);
  for (int m = 0; m < n_filters; ++m) {
    const double* w = weights.data() + static_cast<size_t>(m) * bins;
    double acc = 0.0;
    for (int b = 0; b < bins; ++b) acc += w[b] * power_bins[b];
    out[m] = acc;
  }
  return out;
}

std::vector<double> dct2_orthonormal(const std::vector<double>& x, int n_keep) {
  const int n = static_cast<int>(x.size());
  if (n == 0 || n_keep < 1 || n_keep > n) fail("BadArgs", "dct2: bad sizes");
  std::vector<double> y(n_keep, 0.0);
  const double s0 = std::sqrt(1.0 / n);
  const double s = std::sqrt(2.0 / n);
  for (int j = 0; j < n_keep; ++j) {
    double acc = 0.0;
    for (int m = 0; m < n; ++m) acc += x[m] * std::cos(kPi * j * (2.0 * m + 1.0) / (2.0 * n));
    y[j] = (j == 0 ? s0 : s) * acc;
  }
  return y;
}

}  // namespace ser

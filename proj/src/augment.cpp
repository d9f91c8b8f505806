#include "ser/augment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ser/error.hpp"
#include "ser/rng.hpp"

namespace ser {

std::string augment_kind_name(AugmentKind k) {
  switch (k) {
    case AugmentKind::Awgn: return "awgn";
    case AugmentKind::Stretch: return "stretch";
    case AugmentKind::Pitch: return "pitch";
  }
  return "?";
}

AugmentKind parse_augment_kind(const std::string& name) {
  if (name == "awgn") return AugmentKind::Awgn;
  if (name == "stretch") return AugmentKind::Stretch;
  if (name == "pitch") return AugmentKind::Pitch;
  fail("BadArgs", "unknown augmentation kind '" + name + "'");
}

void AugmentSpec::validate() const {
  switch (kind) {
    case AugmentKind::Awgn:
      if (!(param > 0.0)) fail("BadArgs", "awgn rate must be > 0");
      break;
    case AugmentKind::Stretch:
      if (!(param > 0.0 && param <= 4.0)) fail("BadArgs", "stretch factor must be in (0, 4]");
      break;
    case AugmentKind::Pitch:
      if (!std::isfinite(param)) fail("BadArgs", "pitch steps must be finite");
      break;
  }
}

std::string AugmentSpec::tag() const {
  char buf[80];
  std::snprintf(buf, sizeof buf, "%s:%.17g:%llu", augment_kind_name(kind).c_str(), param,
                static_cast<unsigned long long>(seed));
  return buf;
}

AudioClip add_awgn(const AudioClip& clip, double rate, uint64_t seed) {
  if (!(rate > 0.0)) fail("BadArgs", "awgn rate must be > 0");
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::fabs(s));

  Rng rng(seed);
  const double u = rng.uniform();
  const double scale = rate * u * peak;

  AudioClip out = clip;
  for (double& s : out.samples) {
    s = std::clamp(s + scale * rng.normal(), -1.0, 1.0);
  }
  return out;
}

AudioClip time_stretch(const AudioClip& clip, double factor) {
  if (!(factor > 0.0 && factor <= 4.0)) fail("BadArgs", "stretch factor must be in (0, 4]");
  const int n = clip.length();
  if (n == 0) fail("BadArgs", "empty clip");

  // Overlap-add with waveform-similarity alignment. Grains land on a fixed
  // synthesis grid h_s; their sources sit near t * h_a (h_s = h_a / factor)
  // but are nudged within +-tol to stay phase-coherent with the previous
  // grain. Without the nudge, near-1 factors average overlapping grains into
  // a resampled (pitch-shifted) signal instead of a time-scaled one.
  const int win = std::max(4, static_cast<int>(std::lround(0.025 * clip.sample_rate)));
  const int hop_s = std::max(1, win / 2);
  const double hop_a = hop_s * factor;
  const int tol = std::max(1, win / 4);
  const auto out_len = static_cast<size_t>(std::llround(n / factor));

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source = clip.source;
  out.samples.assign(out_len, 0.0);
  std::vector<double> wsum(out_len, 0.0);

  std::vector<double> window(win);
  for (int i = 0; i < win; ++i) {
    window[i] = win > 1 ? 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * i / (win - 1)))
                        : 1.0;
  }

  auto clamp_src = [&](long long s) {
    return std::clamp(s, 0LL, static_cast<long long>(n - 1));
  };

  long long prev_src = 0;
  for (int t = 0;; ++t) {
    const long long dst = static_cast<long long>(t) * hop_s;
    if (dst >= static_cast<long long>(out_len)) break;
    const long long nominal = std::llround(t * hop_a);
    if (nominal >= n) break;

    long long src = nominal;
    if (t > 0) {
      // the seamless continuation of the previous grain
      const long long ref = clamp_src(prev_src + hop_s);
      double best = -1e300;
      for (long long d = -tol; d <= tol; ++d) {
        const long long cand = nominal + d;
        if (cand < 0 || cand >= n) continue;
        double score = 0.0;
        const int m = static_cast<int>(std::min<long long>(win, n - std::max(cand, ref)));
        for (int i = 0; i < m; ++i) {
          score += clip.samples[cand + i] * clip.samples[ref + i];
        }
        if (score > best) {
          best = score;
          src = cand;
        }
      }
    }
    prev_src = src;

    for (int i = 0; i < win; ++i) {
      const long long s = src + i;
      const long long d = dst + i;
      if (s >= n || d >= static_cast<long long>(out_len)) break;
      out.samples[d] += clip.samples[s] * window[i];
      wsum[d] += window[i];
    }
  }
  for (size_t i = 0; i < out_len; ++i) {
    if (wsum[i] > 1e-8) out.samples[i] /= wsum[i];
  }
  return out;
}

AudioClip pitch_shift(const AudioClip& clip, double steps) {
  if (!std::isfinite(steps)) fail("BadArgs", "pitch steps must be finite");
  const size_t n = clip.samples.size();
  const double ratio = std::pow(2.0, steps / 12.0);

  // Stretch to len * ratio (pitch untouched), then resample by ratio so the
  // length returns to len while every frequency moves to ratio * f.
  AudioClip stretched = time_stretch(clip, 1.0 / ratio);
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source = clip.source;
  out.samples = resample_ratio(stretched.samples, ratio);
  out.samples.resize(n, 0.0);  // rounding can leave the length off by one
  for (double& s : out.samples) s = std::clamp(s, -1.0, 1.0);
  return out;
}

AudioClip apply_augment(const AudioClip& clip, const AugmentSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case AugmentKind::Awgn:
      return add_awgn(clip, spec.param, mix_seed(spec.seed, fnv1a(clip.source)));
    case AugmentKind::Stretch: return time_stretch(clip, spec.param);
    case AugmentKind::Pitch: return pitch_shift(clip, spec.param);
  }
  fail("BadArgs", "unreachable augment kind");
}

Manifest expand(const Manifest& manifest, const std::vector<AugmentSpec>& specs,
                AugmentScope scope) {
  if (specs.empty()) fail("EmptySpecs", "expand needs at least one augmentation spec");
  for (const auto& s : specs) s.validate();

  Manifest out;
  out.entries = manifest.entries;
  const bool tagged = manifest.has_splits();
  for (const auto& e : manifest.entries) {
    const bool eligible =
        scope == AugmentScope::All || !tagged || e.split == Split::Train;
    if (!eligible) continue;
    for (const auto& s : specs) {
      ManifestEntry a = e;
      a.augment_tag = s.tag();
      out.entries.push_back(std::move(a));
    }
  }
  return out;
}

}  // namespace ser

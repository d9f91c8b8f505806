#include "ser/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ser/error.hpp"

namespace ser {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

float read_f32(const unsigned char* p) {
  uint32_t bits = read_u32(p);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace

AudioClip decode_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("MissingFile", "cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("MalformedWav", path + ": not a RIFF/WAVE file");
  }

  uint16_t format = 0, channels = 0, bits_per_sample = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  size_t data_off = 0, data_len = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    uint32_t chunk_len = read_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_len > bytes.size()) fail("MalformedWav", path + ": truncated chunk");
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) fail("MalformedWav", path + ": short fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      sample_rate = read_u32(f + 4);
      bits_per_sample = read_u16(f + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      data_off = body;
      data_len = chunk_len;
      break;  // fmt precedes data in every conforming file
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_off == 0) fail("MalformedWav", path + ": missing fmt or data chunk");
  if (channels < 1 || channels > 2) {
    fail("UnsupportedEncoding", path + ": " + std::to_string(channels) + " channels");
  }
  const bool pcm16 = (format == 1 && bits_per_sample == 16);
  const bool f32 = (format == 3 && bits_per_sample == 32);
  if (!pcm16 && !f32) {
    fail("UnsupportedEncoding", path + ": format tag " + std::to_string(format) + ", " +
                                    std::to_string(bits_per_sample) + " bits");
  }
  if (sample_rate == 0) fail("MalformedWav", path + ": zero sample rate");

  const size_t bytes_per_sample = bits_per_sample / 8;
  const size_t frame_size = bytes_per_sample * channels;
  const size_t frames = data_len / frame_size;
  if (frames == 0) fail("ZeroFrames", path + ": empty data chunk");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.source = path;
  clip.samples.resize(frames);
  const unsigned char* d = bytes.data() + data_off;
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (uint16_t c = 0; c < channels; ++c) {
      const unsigned char* s = d + i * frame_size + c * bytes_per_sample;
      if (pcm16) {
        int16_t v = static_cast<int16_t>(read_u16(s));
        acc += v / 32768.0;
      } else {
        acc += read_f32(s);
      }
    }
    clip.samples[i] = std::clamp(acc / channels, -1.0, 1.0);
  }
  return clip;
}

void write_wav_pcm16(const AudioClip& clip, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("UnwritablePath", "cannot write " + path);

  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_len = n * 2;
  const uint32_t rate = static_cast<uint32_t>(clip.sample_rate);

  auto put_u32 = [&](uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
  };
  auto put_u16 = [&](uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<char*>(b), 2);
  };

  out.write("RIFF", 4);
  put_u32(36 + data_len);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put_u32(16);
  put_u16(1);  // PCM
  put_u16(1);  // mono
  put_u32(rate);
  put_u32(rate * 2);
  put_u16(2);
  put_u16(16);
  out.write("data", 4);
  put_u32(data_len);
  for (uint32_t i = 0; i < n; ++i) {
    double v = std::clamp(clip.samples[i], -1.0, 1.0);
    auto q = static_cast<int16_t>(std::lround(v * 32767.0));
    put_u16(static_cast<uint16_t>(q));
  }
}

std::vector<double> resample_ratio(const std::vector<double>& x, double step) {
  const auto n = static_cast<long long>(x.size());
  const auto out_len = static_cast<size_t>(std::llround(n / step));
  std::vector<double> y(out_len);
  for (size_t i = 0; i < out_len; ++i) {
    double pos = i * step;
    if (pos >= n - 1) {
      y[i] = x.back();
      continue;
    }
    auto lo = static_cast<size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    y[i] = x[lo] + frac * (x[lo + 1] - x[lo]);
  }
  return y;
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) fail("BadArgs", "resample: target rate must be positive");
  if (clip.samples.empty()) fail("BadArgs", "resample: empty clip");
  AudioClip out;
  out.sample_rate = target_rate;
  out.source = clip.source;
  if (target_rate == clip.sample_rate) {
    out.samples = clip.samples;
    return out;
  }
  out.samples = resample_ratio(clip.samples,
                               static_cast<double>(clip.sample_rate) / target_rate);
  return out;
}

AudioClip fix_length(const AudioClip& clip, double duration_s) {
  if (duration_s <= 0) fail("BadArgs", "fix_length: duration must be positive");
  const auto target = static_cast<size_t>(std::llround(duration_s * clip.sample_rate));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.source = clip.source;
  out.samples = clip.samples;
  out.samples.resize(target, 0.0);  // pads the tail or truncates it
  return out;
}

}  // namespace ser

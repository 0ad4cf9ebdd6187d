/*
 * Copyright 2026 The Regen Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "regen/audio_io.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>

#include "regen/error.h"

namespace regen {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

// Modified Bessel function of the first kind, order zero.
double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

void Waveform::validate() const {
  if (sample_rate_hz <= 0) {
    throw ArgumentError("waveform sample rate must be positive, got " +
                        std::to_string(sample_rate_hz));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double s = samples[i];
    if (!std::isfinite(s) || std::abs(s) > 1.0) {
      throw ArgumentError("waveform sample " + std::to_string(i) +
                          " is non-finite or outside [-1, 1]");
    }
  }
}

FrameGrid FrameGrid::ForRate(int sample_rate_hz, int frame_rate_hz,
                             int window_samples) {
  if (sample_rate_hz <= 0 || frame_rate_hz <= 0 || window_samples <= 0) {
    throw ArgumentError("frame grid rates and window must be positive");
  }
  if (sample_rate_hz % frame_rate_hz != 0) {
    throw ArgumentError("sample rate " + std::to_string(sample_rate_hz) +
                        " is not a multiple of frame rate " +
                        std::to_string(frame_rate_hz));
  }
  return FrameGrid{frame_rate_hz, sample_rate_hz / frame_rate_hz,
                   window_samples};
}

std::size_t FrameGrid::num_frames(std::size_t num_samples) const {
  const auto hop = static_cast<std::size_t>(hop_samples);
  return (num_samples + hop - 1) / hop;
}

Waveform decode_wav(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw ParseError("not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      throw ParseError("WAV chunk extends past end of file");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw ParseError("WAV fmt chunk too short");
      const unsigned char* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) throw ParseError("WAV extensible fmt chunk too short");
        // First two bytes of the sub-format GUID carry the actual codec.
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1u);
  }
  if (!have_fmt) throw ParseError("WAV file has no fmt chunk");
  if (data == nullptr) throw ParseError("WAV file has no data chunk");
  if (channels == 0 || rate == 0) {
    throw ParseError("WAV header has zero channels or zero sample rate");
  }

  int bytes_per_sample = 0;
  if (format == kFormatPcm && bits == 16) {
    bytes_per_sample = 2;
  } else if (format == kFormatFloat && bits == 32) {
    bytes_per_sample = 4;
  } else {
    throw UnsupportedFormatError("unsupported WAV encoding: format " +
                                 std::to_string(format) + ", " +
                                 std::to_string(bits) + " bits");
  }

  const std::size_t frame_bytes =
      static_cast<std::size_t>(bytes_per_sample) * channels;
  const std::size_t frames = data_size / frame_bytes;
  Waveform out;
  out.sample_rate_hz = static_cast<int>(rate);
  out.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + i * frame_bytes + c * bytes_per_sample;
      if (bytes_per_sample == 2) {
        const auto v = static_cast<std::int16_t>(read_u16(p));
        acc += static_cast<double>(v) / 32768.0;
      } else {
        acc += static_cast<double>(std::bit_cast<float>(read_u32(p)));
      }
    }
    out.samples[i] = channels == 1 ? acc : acc / channels;
  }
  return out;
}

Waveform read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_wav(bytes);
}

std::vector<unsigned char> encode_wav(const Waveform& w, WavEncoding encoding) {
  if (w.sample_rate_hz <= 0) {
    throw ArgumentError("cannot write WAV with non-positive sample rate");
  }
  const bool pcm = encoding == WavEncoding::kPcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t block = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(w.samples.size() * block);

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(w.sample_rate_hz) * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);
  for (double s : w.samples) {
    if (pcm) {
      const double q = std::round(std::clamp(s, -1.0, 1.0) * 32768.0);
      const auto v = static_cast<std::int16_t>(std::clamp(q, -32768.0, 32767.0));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }
  return out;
}

void write_wav(const Waveform& w, const std::filesystem::path& path,
               WavEncoding encoding) {
  const auto bytes = encode_wav(w, encoding);
  write_file_atomic(path, bytes);
}

Waveform resample(const Waveform& w, int target_rate_hz) {
  if (w.sample_rate_hz <= 0 || target_rate_hz <= 0) {
    throw ArgumentError("resample rates must be positive (source " +
                        std::to_string(w.sample_rate_hz) + ", target " +
                        std::to_string(target_rate_hz) + ")");
  }
  if (w.sample_rate_hz == target_rate_hz) return w;

  constexpr double kHalfTaps = 32.0;
  constexpr double kBeta = 8.0;
  constexpr double kRolloff = 0.95;

  const double src = w.sample_rate_hz;
  const double dst = target_rate_hz;
  const double ratio = dst / src;
  const double scale = std::min(1.0, ratio);
  // Cutoff in cycles per source sample; the kernel widens when decimating.
  const double cutoff = 0.5 * scale * kRolloff;
  const double half_width = kHalfTaps / scale;
  const double i0_beta = bessel_i0(kBeta);

  const std::size_t in_len = w.samples.size();
  const auto out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(in_len) * dst / src));
  Waveform out;
  out.sample_rate_hz = target_rate_hz;
  out.samples.resize(out_len);

  // Output instants repeat their sub-sample phase every `phases` samples, so
  // the kernel taps are tabulated once per phase.
  const std::int64_t g = std::gcd(w.sample_rate_hz, target_rate_hz);
  const std::int64_t phases = target_rate_hz / g;
  const std::int64_t step = w.sample_rate_hz / g;
  struct PhaseTaps {
    std::int64_t first = 0;
    std::vector<double> weights;
  };
  std::vector<PhaseTaps> table(static_cast<std::size_t>(phases));
  for (std::int64_t p = 0; p < phases; ++p) {
    const double tp = static_cast<double>(p) * src / dst;
    auto& taps = table[static_cast<std::size_t>(p)];
    taps.first = static_cast<std::int64_t>(std::ceil(tp - half_width));
    const auto last = static_cast<std::int64_t>(std::floor(tp + half_width));
    for (std::int64_t k = taps.first; k <= last; ++k) {
      const double d = tp - static_cast<double>(k);
      const double r = d / half_width;
      const double win =
          bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - r * r))) / i0_beta;
      taps.weights.push_back(2.0 * cutoff * sinc(2.0 * cutoff * d) * win);
    }
  }

  const auto n = static_cast<std::int64_t>(in_len);
  for (std::size_t m = 0; m < out_len; ++m) {
    const auto mi = static_cast<std::int64_t>(m);
    const auto& taps = table[static_cast<std::size_t>(mi % phases)];
    const std::int64_t base = (mi / phases) * step + taps.first;
    double acc = 0.0;
    for (std::size_t j = 0; j < taps.weights.size(); ++j) {
      const std::int64_t k = base + static_cast<std::int64_t>(j);
      if (k < 0 || k >= n) continue;
      acc += w.samples[static_cast<std::size_t>(k)] * taps.weights[j];
    }
    out.samples[m] = acc;
  }
  return out;
}

std::vector<std::vector<double>> segment_frames(std::span<const double> samples,
                                                int window, int hop) {
  if (window <= 0 || hop <= 0) {
    throw ArgumentError("segment_frames needs positive window and hop");
  }
  const std::size_t h = static_cast<std::size_t>(hop);
  const std::size_t frames = (samples.size() + h - 1) / h;
  std::vector<std::vector<double>> out(frames,
                                       std::vector<double>(window, 0.0));
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * h;
    const std::size_t n =
        std::min<std::size_t>(window, samples.size() - start);
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(start), n,
                out[f].begin());
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path,
                       std::span<const unsigned char> bytes) {
  static std::atomic<unsigned> counter{0};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(counter.fetch_add(1));
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    f.flush();
    if (!f) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace regen

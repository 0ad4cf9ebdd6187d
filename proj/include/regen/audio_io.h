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

#ifndef REGEN_AUDIO_IO_H_
#define REGEN_AUDIO_IO_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace regen {

// Canonical pipeline rates.
inline constexpr int kInputRateHz = 16000;
inline constexpr int kFrameRateHz = 250;
inline constexpr int kOutputRateHz = 24000;
// Samples per conditioning frame at the input and output rates.
inline constexpr int kInputHop = kInputRateHz / kFrameRateHz;    // 64
inline constexpr int kOutputHop = kOutputRateHz / kFrameRateHz;  // 96

// Mono audio with an explicit sample rate.
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kInputRateHz;

  Waveform() = default;
  Waveform(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate_hz(rate) {}

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }

  // Throws ArgumentError if a sample is non-finite or outside [-1, 1], or the
  // rate is not positive.
  void validate() const;

  friend bool operator==(const Waveform&, const Waveform&) = default;
};

// Frame-rate grid over a sampled signal.
struct FrameGrid {
  int frame_rate_hz = kFrameRateHz;
  int hop_samples = kInputHop;
  int window_samples = 512;

  // Throws ArgumentError unless sample_rate / frame_rate divides exactly.
  static FrameGrid ForRate(int sample_rate_hz, int frame_rate_hz,
                           int window_samples);
  // Number of frames covering `num_samples`: ceil(num_samples / hop).
  std::size_t num_frames(std::size_t num_samples) const;
};

enum class WavEncoding { kPcm16, kFloat32 };

// Reads a RIFF/WAVE file (PCM16 or IEEE float32, any channel count) and
// averages channels down to mono. Throws ParseError on a malformed container
// and UnsupportedFormatError on other codecs or bit depths.
Waveform read_wav(const std::filesystem::path& path);
Waveform decode_wav(std::span<const unsigned char> bytes);

// Writes a mono WAV atomically (temp file + rename). Samples are clamped to
// [-1, 1] for PCM16. Throws IoError if the destination is not writable.
void write_wav(const Waveform& w, const std::filesystem::path& path,
               WavEncoding encoding = WavEncoding::kFloat32);
std::vector<unsigned char> encode_wav(const Waveform& w, WavEncoding encoding);

// Windowed-sinc resampler (64-tap Kaiser). Output length is
// round(len * target / source); returns the input unchanged when the rates are
// equal.
Waveform resample(const Waveform& w, int target_rate_hz);

// Splits `samples` into frames of `window` samples advanced by `hop`,
// zero-padding the tail. Frame count is ceil(len / hop).
std::vector<std::vector<double>> segment_frames(std::span<const double> samples,
                                                int window, int hop);

// Writes bytes to `path` via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const unsigned char> bytes);
std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);

}  // namespace regen

#endif  // REGEN_AUDIO_IO_H_

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

#ifndef REGEN_DSP_H_
#define REGEN_DSP_H_

#include <complex>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "regen/audio_io.h"
#include "regen/matrix.h"

namespace regen::dsp {

// In-place radix-2 complex FFT. Plans are immutable and may be shared across
// threads; `Get` returns a cached plan for the size.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);
  static std::shared_ptr<const FftPlan> Get(std::size_t n);

  std::size_t size() const { return n_; }
  // X[k] = sum_n x[n] exp(-2 pi i k n / N).
  void forward(std::span<std::complex<double>> x) const;
  // x[n] = sum_k X[k] exp(+2 pi i k n / N), no 1/N scaling.
  void inverse_unscaled(std::span<std::complex<double>> x) const;

 private:
  void transform(std::span<std::complex<double>> x, bool inverse) const;

  std::size_t n_;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> twiddles_;
};

bool is_power_of_two(std::size_t n);

// Periodic Hann window: 0.5 - 0.5 cos(2 pi n / N).
std::vector<double> hann_window(std::size_t n);

// Reflect-pads index `i` into [0, len) without repeating the edge sample,
// folding repeatedly for offsets longer than the signal.
std::size_t reflect_index(std::int64_t i, std::size_t len);

struct MagnitudeSpectrogram {
  Matrix values;  // [frames x (fft_size / 2 + 1)]
  int fft_size = 0;
  int hop = 0;
  int sample_rate_hz = 0;

  std::size_t frames() const { return values.rows; }
  std::size_t bins() const { return values.cols; }
};

// Hann-windowed, centered (reflect-padded) magnitude STFT. Frame t is centered
// on sample t * hop; there are ceil(len / hop) frames.
MagnitudeSpectrogram stft_magnitude(const Waveform& w, int fft_size, int hop);
// Validates fft_size in {64..2048} power of two and 0 < hop <= fft_size.
void check_stft_args(int fft_size, int hop);
std::size_t stft_num_frames(std::size_t len, int hop);

// Magnitude of the real FFT of one windowed frame (length fft_size).
std::vector<double> frame_magnitude(std::span<const double> frame,
                                    std::span<const double> window);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel weights, [n_mels x (fft_size / 2 + 1)]. A filter narrower
// than one bin keeps unit weight at its nearest bin so no filter is empty.
Matrix mel_weights(int fft_size, int sample_rate_hz, int n_mels, double fmin,
                   double fmax);

// Projects a magnitude spectrogram onto mel filters: [frames x n_mels].
Matrix mel_filterbank(const MagnitudeSpectrogram& spec, int n_mels,
                      double fmin, double fmax);

// IEC 61672 A-weighting, normalized so that 1 kHz maps to exactly 0 dB.
double a_weight_gain_db(double freq_hz);
double a_weight_gain(double freq_hz);

}  // namespace regen::dsp

#endif  // REGEN_DSP_H_

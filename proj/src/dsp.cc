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

#include "regen/dsp.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>

#include "regen/error.h"

namespace regen::dsp {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

FftPlan::FftPlan(std::size_t n) : n_(n) {
  if (!is_power_of_two(n)) {
    throw ArgumentError("FFT size must be a power of two, got " +
                        std::to_string(n));
  }
  bitrev_.resize(n);
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t r = 0;
    for (std::size_t b = 0; b < bits; ++b) {
      if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
    }
    bitrev_[i] = r;
  }
  twiddles_.resize(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k) {
    const double a = -2.0 * std::numbers::pi * static_cast<double>(k) /
                     static_cast<double>(n);
    twiddles_[k] = {std::cos(a), std::sin(a)};
  }
}

std::shared_ptr<const FftPlan> FftPlan::Get(std::size_t n) {
  static std::mutex mu;
  static std::map<std::size_t, std::shared_ptr<const FftPlan>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[n];
  if (!slot) slot = std::make_shared<const FftPlan>(n);
  return slot;
}

void FftPlan::forward(std::span<std::complex<double>> x) const {
  transform(x, false);
}

void FftPlan::inverse_unscaled(std::span<std::complex<double>> x) const {
  transform(x, true);
}

void FftPlan::transform(std::span<std::complex<double>> x, bool inverse) const {
  if (x.size() != n_) throw ShapeError("FFT buffer size mismatch");
  for (std::size_t i = 0; i < n_; ++i) {
    if (i < bitrev_[i]) std::swap(x[i], x[bitrev_[i]]);
  }
  for (std::size_t len = 2; len <= n_; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n_ / len;
    for (std::size_t start = 0; start < n_; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        auto w = twiddles_[k * stride];
        if (inverse) w = std::conj(w);
        const auto a = x[start + k];
        const auto b = x[start + k + half] * w;
        x[start + k] = a + b;
        x[start + k + half] = a - b;
      }
    }
  }
}

std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n));
  }
  return w;
}

std::size_t reflect_index(std::int64_t i, std::size_t len) {
  if (len <= 1) return 0;
  const auto n = static_cast<std::int64_t>(len);
  const std::int64_t period = 2 * (n - 1);
  std::int64_t r = i % period;
  if (r < 0) r += period;
  if (r >= n) r = period - r;
  return static_cast<std::size_t>(r);
}

void check_stft_args(int fft_size, int hop) {
  if (fft_size < 64 || fft_size > 2048 ||
      !is_power_of_two(static_cast<std::size_t>(fft_size))) {
    throw ArgumentError("STFT size must be a power of two in [64, 2048], got " +
                        std::to_string(fft_size));
  }
  if (hop <= 0 || hop > fft_size) {
    throw ArgumentError("STFT hop must be in (0, fft_size], got " +
                        std::to_string(hop));
  }
}

std::size_t stft_num_frames(std::size_t len, int hop) {
  const auto h = static_cast<std::size_t>(hop);
  return (len + h - 1) / h;
}

std::vector<double> frame_magnitude(std::span<const double> frame,
                                    std::span<const double> window) {
  const std::size_t n = frame.size();
  const auto plan = FftPlan::Get(n);
  std::vector<std::complex<double>> buf(n);
  for (std::size_t i = 0; i < n; ++i) buf[i] = frame[i] * window[i];
  plan->forward(buf);
  std::vector<double> mag(n / 2 + 1);
  for (std::size_t k = 0; k < mag.size(); ++k) mag[k] = std::abs(buf[k]);
  return mag;
}

MagnitudeSpectrogram stft_magnitude(const Waveform& w, int fft_size, int hop) {
  check_stft_args(fft_size, hop);
  const std::size_t n = static_cast<std::size_t>(fft_size);
  const std::size_t len = w.samples.size();
  const std::size_t frames = stft_num_frames(len, hop);
  const auto window = hann_window(n);
  const auto plan = FftPlan::Get(n);

  MagnitudeSpectrogram out;
  out.fft_size = fft_size;
  out.hop = hop;
  out.sample_rate_hz = w.sample_rate_hz;
  out.values = Matrix(frames, n / 2 + 1);
  std::vector<std::complex<double>> buf(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto start = static_cast<std::int64_t>(t) * hop -
                       static_cast<std::int64_t>(n / 2);
    for (std::size_t j = 0; j < n; ++j) {
      buf[j] = w.samples[reflect_index(start + static_cast<std::int64_t>(j), len)] *
               window[j];
    }
    plan->forward(buf);
    auto row = out.values.row(t);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = std::abs(buf[k]);
  }
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

Matrix mel_weights(int fft_size, int sample_rate_hz, int n_mels, double fmin,
                   double fmax) {
  if (n_mels < 1) {
    throw ArgumentError("n_mels must be at least 1, got " +
                        std::to_string(n_mels));
  }
  if (!(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate_hz / 2.0)) {
    throw ArgumentError("mel range requires 0 <= fmin < fmax <= Nyquist");
  }
  const std::size_t bins = static_cast<std::size_t>(fft_size) / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate_hz) / fft_size;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));
  }
  Matrix w(static_cast<std::size_t>(n_mels), bins);
  for (std::size_t m = 0; m < w.rows; ++m) {
    const double lo = edges[m];
    const double mid = edges[m + 1];
    const double hi = edges[m + 2];
    double total = 0.0;
    for (std::size_t k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double v = 0.0;
      if (f > lo && f <= mid) {
        v = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        v = (hi - f) / (hi - mid);
      }
      w.at(m, k) = v;
      total += v;
    }
    if (total <= 0.0) {
      const auto k = std::min<std::size_t>(
          bins - 1, static_cast<std::size_t>(std::lround(mid / bin_hz)));
      w.at(m, k) = 1.0;
    }
  }
  return w;
}

Matrix mel_filterbank(const MagnitudeSpectrogram& spec, int n_mels,
                      double fmin, double fmax) {
  const Matrix w =
      mel_weights(spec.fft_size, spec.sample_rate_hz, n_mels, fmin, fmax);
  if (w.cols != spec.bins()) {
    throw ShapeError("spectrogram bin count does not match fft size");
  }
  Matrix out(spec.frames(), w.rows);
  for (std::size_t t = 0; t < spec.frames(); ++t) {
    const auto row = spec.values.row(t);
    for (std::size_t m = 0; m < w.rows; ++m) {
      const auto wr = w.row(m);
      double acc = 0.0;
      for (std::size_t k = 0; k < wr.size(); ++k) acc += wr[k] * row[k];
      out.at(t, m) = acc;
    }
  }
  return out;
}

namespace {

double a_weight_response(double f) {
  const double f2 = f * f;
  constexpr double k1 = 20.598997 * 20.598997;
  constexpr double k2 = 107.65265 * 107.65265;
  constexpr double k3 = 737.86223 * 737.86223;
  constexpr double k4 = 12194.217 * 12194.217;
  return k4 * f2 * f2 /
         ((f2 + k1) * std::sqrt((f2 + k2) * (f2 + k3)) * (f2 + k4));
}

}  // namespace

double a_weight_gain(double freq_hz) {
  if (!(freq_hz > 0.0)) {
    throw ArgumentError("A-weighting needs a positive frequency");
  }
  static const double ref = a_weight_response(1000.0);
  return a_weight_response(freq_hz) / ref;
}

double a_weight_gain_db(double freq_hz) {
  return 20.0 * std::log10(a_weight_gain(freq_hz));
}

}  // namespace regen::dsp

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


// Reference implementations used only by tests. They are written
// independently of the library (direct sums, textbook formulas) and favour
// clarity over speed.

#ifndef REGEN_TESTS_ORACLES_H_
#define REGEN_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "regen/audio_io.h"

namespace regen::oracle {

inline Waveform sine(double freq_hz, double seconds, int rate = kInputRateHz,
                     double amplitude = 0.5) {
  std::vector<double> s(static_cast<std::size_t>(std::lround(seconds * rate)));
  for (std::size_t n = 0; n < s.size(); ++n) {
    s[n] = amplitude * std::sin(2.0 * std::numbers::pi * freq_hz * n / rate);
  }
  return {std::move(s), rate};
}

// Linear chirp from f0 to f1 over the duration.
inline Waveform sweep(double f0, double f1, double seconds, int rate = kInputRateHz,
                      double amplitude = 0.5) {
  const std::size_t len = static_cast<std::size_t>(std::lround(seconds * rate));
  std::vector<double> s(len);
  const double k = (f1 - f0) / seconds;
  for (std::size_t n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) / rate;
    s[n] = amplitude * std::sin(2.0 * std::numbers::pi * (f0 * t + 0.5 * k * t * t));
  }
  return {std::move(s), rate};
}

inline Waveform noise(std::size_t len, unsigned seed, double sd = 0.1,
                      int rate = kInputRateHz) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, sd);
  std::vector<double> s(len);
  for (auto& v : s) v = std::clamp(nd(gen), -1.0, 1.0);
  return {std::move(s), rate};
}

inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t % n) / n);
    }
    out[k] = acc;
  }
  return out;
}

// IEC 61672-1 A-weighting: 20 log10 R_A(f) + 2.00 dB.
inline double iec_a_weight_db(double f) {
  const double f2 = f * f;
  const double c1 = 20.598997 * 20.598997, c2 = 107.65265 * 107.65265;
  const double c3 = 737.86223 * 737.86223, c4 = 12194.217 * 12194.217;
  const double ra = c4 * f2 * f2 /
                    ((f2 + c1) * std::sqrt((f2 + c2) * (f2 + c3)) * (f2 + c4));
  return 20.0 * std::log10(ra) + 2.0;
}

// Frequency of the normalized autocorrelation peak of a 1024-sample window
// centred on `center`, searched over [fmin, fmax] with parabolic refinement.
inline double autocorr_pitch(const std::vector<double>& x, std::size_t center,
                             int rate = kInputRateHz, double fmin = 70.0,
                             double fmax = 500.0) {
  const std::int64_t half = 512;
  auto at = [&](std::int64_t i) {
    return i < 0 || i >= static_cast<std::int64_t>(x.size()) ? 0.0 : x[i];
  };
  const std::int64_t begin = static_cast<std::int64_t>(center) - half;
  const int lag_min = static_cast<int>(std::floor(rate / fmax));
  const int lag_max = static_cast<int>(std::ceil(rate / fmin));
  std::vector<double> r(lag_max + 2, 0.0);
  for (int lag = lag_min - 1; lag <= lag_max + 1; ++lag) {
    double num = 0.0, e0 = 0.0, e1 = 0.0;
    for (std::int64_t i = 0; i + lag < 2 * half; ++i) {
      const double a = at(begin + i), b = at(begin + i + lag);
      num += a * b;
      e0 += a * a;
      e1 += b * b;
    }
    r[lag] = num / std::sqrt(e0 * e1 + 1e-20);
  }
  int best = lag_min;
  for (int lag = lag_min; lag <= lag_max; ++lag) {
    if (r[lag] > r[best]) best = lag;
  }
  const double a = r[best - 1], b = r[best], c = r[best + 1];
  const double denom = a - 2.0 * b + c;
  const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  return rate / (best + shift);
}

// Centred, reflect-padded, periodic-Hann magnitude STFT by direct DFT.
inline std::vector<std::vector<double>> direct_stft(const std::vector<double>& x,
                                                    int fft, int hop) {
  const auto len = static_cast<std::int64_t>(x.size());
  auto reflect = [&](std::int64_t i) {
    while (i < 0 || i >= len) i = i < 0 ? -i : 2 * (len - 1) - i;
    return i;
  };
  const std::size_t frames = (x.size() + hop - 1) / hop;
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t < frames; ++t) {
    std::vector<double> frame(fft);
    for (int n = 0; n < fft; ++n) {
      const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / fft);
      frame[n] = w * x[reflect(static_cast<std::int64_t>(t * hop) - fft / 2 + n)];
    }
    const auto dft = naive_dft(frame);
    std::vector<double> mag(fft / 2 + 1);
    for (int k = 0; k <= fft / 2; ++k) mag[k] = std::abs(dft[k]);
    out.push_back(std::move(mag));
  }
  return out;
}

// Single-scale spectral distance from its definition.
inline double direct_spec_loss(const std::vector<double>& y, const std::vector<double>& x,
                               int fft) {
  const auto sy = direct_stft(y, fft, fft / 4), sx = direct_stft(x, fft, fft / 4);
  double diff = 0.0, norm = 0.0, log_l1 = 0.0, count = 0.0;
  for (std::size_t t = 0; t < sy.size(); ++t) {
    for (std::size_t k = 0; k < sy[t].size(); ++k) {
      diff += (sy[t][k] - sx[t][k]) * (sy[t][k] - sx[t][k]);
      norm += sy[t][k] * sy[t][k];
      log_l1 += std::abs(std::log(std::max(sy[t][k], 1e-7)) - std::log(std::max(sx[t][k], 1e-7)));
      count += 1.0;
    }
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12) + log_l1 / count;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace regen::oracle

#endif  // REGEN_TESTS_ORACLES_H_

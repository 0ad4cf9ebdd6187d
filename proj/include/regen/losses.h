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

// Training objectives.
//
// Single-scale spectral distance between a target y and an estimate x:
//
//   L_m(y, x) = |S(y) - S(x)|_F / |S(y)|_F + |log S(y) - log S(x)|_1 / N
//
// with S the magnitude STFT at FFT size m (Hann, hop m/4), N = frames * bins,
// natural log floored at 1e-7, and |S(y)|_F clamped below at 1e-12. The
// multi-scale loss averages L_m over m in {2048, ..., 64}. The spectral
// energy distance combines two generator draws:
//
//   L_sed(y, g1, g2) = L(y, g1) + L(y, g2) - L(g1, g2)
//
// Adversarial terms are least-squares on the mean of the score map.

#ifndef REGEN_LOSSES_H_
#define REGEN_LOSSES_H_

#include <array>
#include <map>
#include <span>
#include <string>

#include "json.hpp"
#include "regen/audio_io.h"
#include "regen/tensor.h"

namespace regen::losses {

inline constexpr std::array<int, 6> kFftSizes{2048, 1024, 512, 256, 128, 64};
inline constexpr double kLogFloor = 1e-7;
inline constexpr double kNormFloor = 1e-12;
inline constexpr double kDefaultLambda = 4.0;

// Set when the target's spectrogram norm fell below the clamp.
struct SpecLossInfo {
  bool degenerate_target = false;
  std::map<int, double> per_scale;
};

// Tensor forms take 1-D signals [T] of equal length.
ad::Tensor spec_loss_single(const ad::Tensor& y, const ad::Tensor& x,
                            int fft_size, SpecLossInfo* info = nullptr);
// Throws ArgumentError when the signals are shorter than 2048 samples.
ad::Tensor spec_loss_multi(const ad::Tensor& y, const ad::Tensor& x,
                           SpecLossInfo* info = nullptr);
ad::Tensor sed_loss(const ad::Tensor& y, const ad::Tensor& g1,
                    const ad::Tensor& g2);
// mean((1 - d_fake)^2)
ad::Tensor lsgan_generator_loss(const ad::Tensor& d_fake);
// mean((1 - d_real)^2) + mean(d_fake^2)
ad::Tensor lsgan_discriminator_loss(const ad::Tensor& d_real,
                                    const ad::Tensor& d_fake);
ad::Tensor generator_objective(const ad::Tensor& l_sed,
                               const ad::Tensor& l_adv,
                               double lambda = kDefaultLambda);

// Waveform forms (same rate and length required).
double spec_loss_single(const Waveform& y, const Waveform& x, int fft_size,
                        SpecLossInfo* info = nullptr);
double spec_loss_multi(const Waveform& y, const Waveform& x,
                       SpecLossInfo* info = nullptr);
double sed_loss(const Waveform& y, const Waveform& g1, const Waveform& g2);

struct LsganLosses {
  double l_adv = 0.0;
  double l_d = 0.0;
};
LsganLosses lsgan_losses(std::span<const double> d_real,
                         std::span<const double> d_fake);
double generator_objective(double l_sed, double l_adv,
                           double lambda = kDefaultLambda);

struct LossReport {
  std::int64_t step = 0;
  std::map<int, double> l_spec_per_scale;
  double l_spec = 0.0;
  double l_sed = 0.0;
  double l_adv = 0.0;
  double l_d = 0.0;
  double l_g = 0.0;
  bool degenerate_target = false;

  // Throws NumericError on a non-finite or out-of-range field.
  void validate() const;
  nlohmann::json to_json() const;
  // One JSON-lines record.
  std::string to_jsonl() const;
  friend bool operator==(const LossReport&, const LossReport&) = default;
};

}  // namespace regen::losses

#endif  // REGEN_LOSSES_H_

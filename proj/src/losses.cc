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

#include "regen/losses.h"

#include <algorithm>
#include <cmath>

#include "regen/error.h"

namespace regen::losses {
namespace {

void require_pair(const ad::Tensor& y, const ad::Tensor& x) {
  if (y.rank() != 1 || y.shape() != x.shape()) {
    throw ShapeError("spectral loss needs equal-length 1-D signals, got " +
                     ad::shape_str(y.shape()) + " and " + ad::shape_str(x.shape()));
  }
}

ad::Tensor as_tensor(const Waveform& w) {
  return ad::Tensor::from({w.size()}, w.samples);
}

void require_waveforms(const Waveform& a, const Waveform& b) {
  if (a.sample_rate_hz != b.sample_rate_hz) {
    throw ArgumentError("spectral loss inputs have different sample rates");
  }
  if (a.size() != b.size()) {
    throw ArgumentError("spectral loss inputs have different lengths (" +
                        std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  }
}

}  // namespace

ad::Tensor spec_loss_single(const ad::Tensor& y, const ad::Tensor& x,
                            int fft_size, SpecLossInfo* info) {
  require_pair(y, x);
  const int hop = fft_size / 4;
  const ad::Tensor sy = ad::stft_magnitude(y, fft_size, hop);
  const ad::Tensor sx = ad::stft_magnitude(x, fft_size, hop);
  ad::Tensor denom = ad::frobenius_norm(sy);
  if (denom.item() < kNormFloor) {
    denom = ad::Tensor::scalar(kNormFloor);
    if (info) info->degenerate_target = true;
  }
  const ad::Tensor frob = ad::div_scalar(ad::frobenius_norm(ad::sub(sy, sx)), denom);
  const ad::Tensor log_term = ad::scale(
      ad::l1_norm(ad::sub(ad::log_floor(sy, kLogFloor), ad::log_floor(sx, kLogFloor))),
      1.0 / static_cast<double>(sy.numel()));
  ad::Tensor out = ad::add(frob, log_term);
  if (info) info->per_scale[fft_size] = out.item();
  return out;
}

ad::Tensor spec_loss_multi(const ad::Tensor& y, const ad::Tensor& x,
                           SpecLossInfo* info) {
  require_pair(y, x);
  if (y.numel() < static_cast<std::size_t>(kFftSizes[0])) {
    throw ArgumentError("multi-scale spectral loss needs at least 2048 samples, got " +
                        std::to_string(y.numel()));
  }
  ad::Tensor total;
  for (int m : kFftSizes) {
    const ad::Tensor l = spec_loss_single(y, x, m, info);
    total = total.defined() ? ad::add(total, l) : l;
  }
  return ad::scale(total, 1.0 / static_cast<double>(kFftSizes.size()));
}

ad::Tensor sed_loss(const ad::Tensor& y, const ad::Tensor& g1,
                    const ad::Tensor& g2) {
  return ad::sub(ad::add(spec_loss_multi(y, g1), spec_loss_multi(y, g2)),
                 spec_loss_multi(g1, g2));
}

ad::Tensor lsgan_generator_loss(const ad::Tensor& d_fake) {
  return ad::mean(ad::square(ad::add_scalar(ad::scale(d_fake, -1.0), 1.0)));
}

ad::Tensor lsgan_discriminator_loss(const ad::Tensor& d_real,
                                    const ad::Tensor& d_fake) {
  return ad::add(lsgan_generator_loss(d_real), ad::mean(ad::square(d_fake)));
}

ad::Tensor generator_objective(const ad::Tensor& l_sed, const ad::Tensor& l_adv,
                               double lambda) {
  return ad::add(l_sed, ad::scale(l_adv, lambda));
}

double spec_loss_single(const Waveform& y, const Waveform& x, int fft_size,
                        SpecLossInfo* info) {
  require_waveforms(y, x);
  ad::NoGradGuard no_grad;
  return spec_loss_single(as_tensor(y), as_tensor(x), fft_size, info).item();
}

double spec_loss_multi(const Waveform& y, const Waveform& x, SpecLossInfo* info) {
  require_waveforms(y, x);
  ad::NoGradGuard no_grad;
  return spec_loss_multi(as_tensor(y), as_tensor(x), info).item();
}

double sed_loss(const Waveform& y, const Waveform& g1, const Waveform& g2) {
  require_waveforms(y, g1);
  require_waveforms(y, g2);
  ad::NoGradGuard no_grad;
  return sed_loss(as_tensor(y), as_tensor(g1), as_tensor(g2)).item();
}

LsganLosses lsgan_losses(std::span<const double> d_real,
                         std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) {
    throw ArgumentError("adversarial losses need non-empty score maps");
  }
  ad::NoGradGuard no_grad;
  const auto real = ad::Tensor::from({d_real.size()}, {d_real.begin(), d_real.end()});
  const auto fake = ad::Tensor::from({d_fake.size()}, {d_fake.begin(), d_fake.end()});
  check_finite(real, "real scores");
  check_finite(fake, "fake scores");
  return {lsgan_generator_loss(fake).item(),
          lsgan_discriminator_loss(real, fake).item()};
}

double generator_objective(double l_sed, double l_adv, double lambda) {
  if (!std::isfinite(l_sed) || !std::isfinite(l_adv) || !std::isfinite(lambda)) {
    throw NumericError("generator objective needs finite inputs");
  }
  return l_sed + lambda * l_adv;
}

void LossReport::validate() const {
  for (double v : {l_spec, l_sed, l_adv, l_d, l_g}) {
    if (!std::isfinite(v)) {
      throw NumericError("non-finite loss at step " + std::to_string(step));
    }
  }
  if (l_spec < 0.0 || l_adv < 0.0 || l_d < 0.0) {
    throw NumericError("negative loss at step " + std::to_string(step));
  }
}

nlohmann::json LossReport::to_json() const {
  nlohmann::json per_scale = nlohmann::json::object();
  for (const auto& [m, v] : l_spec_per_scale) per_scale[std::to_string(m)] = v;
  return {{"step", step},   {"l_spec_per_scale", per_scale},
          {"l_spec", l_spec}, {"l_sed", l_sed},
          {"l_adv", l_adv}, {"l_d", l_d},
          {"l_g", l_g},     {"degenerate_target", degenerate_target}};
}

std::string LossReport::to_jsonl() const { return to_json().dump() + "\n"; }

}  // namespace regen::losses

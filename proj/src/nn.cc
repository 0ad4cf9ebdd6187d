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

#include "regen/nn.h"

#include <cmath>

#include "regen/error.h"

namespace regen::nn {

void round_to_f32(std::span<double> v) {
  for (double& x : v) x = static_cast<float>(x);
}

std::size_t StateRegistry::num_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

// ---- Spectral normalization ---------------------------------------------------

namespace {

double normalize(std::vector<double>& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 1e-12) {
    for (double& x : v) x /= n;
  }
  return n;
}

std::size_t matrix_cols(const ad::Tensor& w) {
  if (w.rank() < 2) {
    throw ShapeError("spectral norm needs a weight of rank >= 2, got " +
                     ad::shape_str(w.shape()));
  }
  return w.numel() / w.dim(0);
}

}  // namespace

SpectralNormState init_spectral_norm_state(std::size_t rows, std::size_t cols,
                                           std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  SpectralNormState s{std::vector<double>(rows), std::vector<double>(cols)};
  for (double& x : s.u) x = normal(rng);
  for (double& x : s.v) x = normal(rng);
  normalize(s.u);
  normalize(s.v);
  round_to_f32(s.u);
  round_to_f32(s.v);
  return s;
}

double power_iteration(const ad::Tensor& weight, SpectralNormState& s) {
  const std::size_t rows = weight.dim(0);
  const std::size_t cols = matrix_cols(weight);
  if (s.u.size() != rows || s.v.size() != cols) {
    throw ShapeError("spectral norm state does not match weight " +
                     ad::shape_str(weight.shape()));
  }
  const auto& w = weight.values();
  std::fill(s.v.begin(), s.v.end(), 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double ur = s.u[r];
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s.v[c] += ur * row[c];
  }
  normalize(s.v);
  double sigma = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = w.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * s.v[c];
    s.u[r] = acc;
  }
  sigma = normalize(s.u);
  round_to_f32(s.u);
  round_to_f32(s.v);
  return sigma;
}

ad::Tensor spectral_weight(const ad::Tensor& weight,
                           const SpectralNormState& s) {
  const std::size_t rows = weight.dim(0);
  const std::size_t cols = matrix_cols(weight);
  const auto u = ad::Tensor::from({1, rows}, s.u);
  const auto v = ad::Tensor::from({cols, 1}, s.v);
  ad::Tensor sigma = ad::matmul(
      ad::matmul(u, ad::reshape(weight, {rows, cols})), v);
  if (std::abs(sigma.item()) < 1e-12) sigma = ad::Tensor::scalar(1e-12);
  return ad::div_scalar(weight, ad::reshape(sigma, {1}));
}

ad::Tensor spectral_normalize(const ad::Tensor& weight, SpectralNormState& s) {
  power_iteration(weight, s);
  return spectral_weight(weight, s);
}

// ---- Convolution layer ----------------------------------------------------------

std::size_t Conv1dSpec::num_parameters() const {
  return out_channels * in_channels * kernel + (bias ? out_channels : 0);
}

ad::Conv1dOptions Conv1dSpec::options() const {
  switch (padding) {
    case Padding::kSame: {
      auto o = ad::Conv1dOptions::Same(kernel, dilation);
      o.stride = stride;
      return o;
    }
    case Padding::kCausal: {
      auto o = ad::Conv1dOptions::Causal(kernel, dilation);
      o.stride = stride;
      return o;
    }
    case Padding::kValid:
      break;
  }
  return {stride, dilation, 0, 0};
}

Conv1d::Conv1d(const Conv1dSpec& spec, std::mt19937_64& rng, double gain)
    : spec_(spec) {
  if (spec.in_channels == 0 || spec.out_channels == 0 || spec.kernel == 0 ||
      spec.dilation == 0 || spec.stride == 0) {
    throw ArgumentError("conv layer dimensions must be positive");
  }
  const double bound =
      gain / std::sqrt(static_cast<double>(spec.in_channels * spec.kernel));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(spec.out_channels * spec.in_channels * spec.kernel);
  for (double& x : w) x = dist(rng);
  round_to_f32(w);
  weight = ad::Tensor::from({spec.out_channels, spec.in_channels, spec.kernel},
                            std::move(w), true);
  if (spec.bias) {
    std::vector<double> b(spec.out_channels);
    for (double& x : b) x = dist(rng);
    round_to_f32(b);
    bias = ad::Tensor::from({spec.out_channels}, std::move(b), true);
  }
  if (spec.spectral_norm) {
    sn = init_spectral_norm_state(spec.out_channels,
                                  spec.in_channels * spec.kernel, rng);
    // Random u, v badly underestimate sigma; converge before first use.
    for (int i = 0; i < 15; ++i) power_iteration(weight, sn);
  }
}

ad::Tensor Conv1d::effective_weight() const {
  return spec_.spectral_norm ? spectral_weight(weight, sn) : weight;
}

ad::Tensor Conv1d::forward(const ad::Tensor& x) const {
  return forward_with(x, effective_weight(), spec_.options());
}

ad::Tensor Conv1d::forward_with(const ad::Tensor& x, const ad::Tensor& w,
                                const ad::Conv1dOptions& opt) const {
  return ad::conv1d(x, w, bias, opt);
}

void Conv1d::power_iterate() {
  if (spec_.spectral_norm) power_iteration(weight, sn);
}

void Conv1d::collect(const std::string& prefix, StateRegistry& reg) {
  reg.params.push_back({prefix + "weight", weight});
  if (bias.defined()) reg.params.push_back({prefix + "bias", bias});
  if (spec_.spectral_norm) {
    reg.buffers.push_back({prefix + "sn_u", {sn.u.size()}, &sn.u});
    reg.buffers.push_back({prefix + "sn_v", {sn.v.size()}, &sn.v});
  }
}

// ---- Conditional batch norm ------------------------------------------------------

CondBatchNorm::CondBatchNorm(std::size_t channels, std::size_t cond_dim,
                             std::mt19937_64& rng)
    : stats(channels) {
  Conv1dSpec spec{cond_dim, channels, 1};
  gamma_proj = Conv1d(spec, rng, 0.5);
  beta_proj = Conv1d(spec, rng, 0.5);
}

ad::Tensor CondBatchNorm::forward(const ad::Tensor& x, const ad::Tensor& cond,
                                  bool training) {
  const std::size_t t = x.dim(2);
  const std::size_t frames = cond.dim(2);
  if (frames == 0 || t % frames != 0) {
    throw ShapeError("conditioning frames " + std::to_string(frames) +
                     " do not divide feature length " + std::to_string(t));
  }
  const std::size_t factor = t / frames;
  ad::Tensor gamma = ad::upsample_nearest1d(
      ad::add_scalar(gamma_proj.forward(cond), 1.0), factor);
  ad::Tensor beta = ad::upsample_nearest1d(beta_proj.forward(cond), factor);
  return ad::batch_norm_conditional(x, gamma, beta, stats, training);
}

void CondBatchNorm::collect(const std::string& prefix, StateRegistry& reg) {
  gamma_proj.collect(prefix + "gamma.", reg);
  beta_proj.collect(prefix + "beta.", reg);
  const std::size_t c = stats.running_mean.size();
  reg.buffers.push_back({prefix + "running_mean", {c}, &stats.running_mean});
  reg.buffers.push_back({prefix + "running_var", {c}, &stats.running_var});
}

// ---- Optimizer ---------------------------------------------------------------------

Adam::Adam(std::vector<NamedParam> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("non-finite gradient in parameter " + p.name);
      }
    }
  }
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Tensor p = params_[i].tensor;
    if (!p.has_grad()) continue;
    const auto& g = p.grad();
    auto& w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = static_cast<float>(b1 * m[j] + (1.0 - b1) * g[j]);
      v[j] = static_cast<float>(b2 * v[j] + (1.0 - b2) * g[j] * g[j]);
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] = static_cast<float>(w[j] -
                                config_.lr * mhat / (std::sqrt(vhat) + config_.eps));
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void Adam::collect(const std::string& prefix, StateRegistry& reg) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& shape = params_[i].tensor.shape();
    reg.buffers.push_back({prefix + "m." + params_[i].name, shape, &m_[i]});
    reg.buffers.push_back({prefix + "v." + params_[i].name, shape, &v_[i]});
  }
}

}  // namespace regen::nn

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

// Layers shared by the generator and discriminator.
//
// Persistent state (parameters, optimizer moments, power-iteration vectors,
// running statistics) is computed in double precision and rounded to the
// nearest float32 after every update, so a float32 checkpoint captures it
// exactly.

#ifndef REGEN_NN_H_
#define REGEN_NN_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "regen/tensor.h"

namespace regen::nn {

void round_to_f32(std::span<double> v);

struct NamedParam {
  std::string name;
  ad::Tensor tensor;
};

struct NamedBuffer {
  std::string name;
  ad::Shape shape;
  std::vector<double>* data;
};

// Flat view over a model's trainable parameters and non-trainable buffers.
struct StateRegistry {
  std::vector<NamedParam> params;
  std::vector<NamedBuffer> buffers;

  std::size_t num_parameters() const;
};

// ---- Spectral normalization ---------------------------------------------------

struct SpectralNormState {
  std::vector<double> u;  // rows
  std::vector<double> v;  // cols
};

// Random unit vectors sized for a [rows x cols] matrix.
SpectralNormState init_spectral_norm_state(std::size_t rows, std::size_t cols,
                                           std::mt19937_64& rng);

// One power iteration v <- W^T u / |.|, u <- W v / |.| on the weight viewed as
// [shape[0] x rest]. Returns the estimate u^T W v.
double power_iteration(const ad::Tensor& weight, SpectralNormState& state);

// weight / sigma with sigma = u^T W v. u and v are constants for the gradient;
// sigma is clamped below at 1e-12.
ad::Tensor spectral_weight(const ad::Tensor& weight,
                           const SpectralNormState& state);

// One power iteration followed by spectral_weight.
ad::Tensor spectral_normalize(const ad::Tensor& weight,
                              SpectralNormState& state);

// ---- Convolution layer ----------------------------------------------------------

enum class Padding { kSame, kCausal, kValid };

struct Conv1dSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t dilation = 1;
  std::size_t stride = 1;
  Padding padding = Padding::kSame;
  bool bias = true;
  bool spectral_norm = false;

  std::size_t num_parameters() const;
  ad::Conv1dOptions options() const;
  // Input samples a causal layer must remember between stream chunks.
  std::size_t history() const { return dilation * (kernel - 1); }
};

class Conv1d {
 public:
  Conv1d() = default;
  // Weights and bias ~ U(-b, b), b = gain / sqrt(in_channels * kernel).
  Conv1d(const Conv1dSpec& spec, std::mt19937_64& rng, double gain = 1.0);

  const Conv1dSpec& spec() const { return spec_; }

  // The weight actually applied: spectrally normalized when enabled.
  ad::Tensor effective_weight() const;
  ad::Tensor forward(const ad::Tensor& x) const;
  // Convolution with explicit weight and options (used by stream caches).
  ad::Tensor forward_with(const ad::Tensor& x, const ad::Tensor& weight,
                          const ad::Conv1dOptions& opt) const;

  void power_iterate();
  void collect(const std::string& prefix, StateRegistry& reg);

  ad::Tensor weight;
  ad::Tensor bias;
  SpectralNormState sn;

 private:
  Conv1dSpec spec_;
};

// ---- Conditional batch norm ------------------------------------------------------

// Batch norm whose per-channel scale and shift come from 1x1 projections of a
// frame-rate conditioning signal: gamma = 1 + Pg(c), beta = Pb(c), repeated to
// the feature rate.
class CondBatchNorm {
 public:
  CondBatchNorm() = default;
  CondBatchNorm(std::size_t channels, std::size_t cond_dim,
                std::mt19937_64& rng);

  // x [B,C,T], cond [B,P,F] with T a multiple of F.
  ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& cond,
                     bool training);
  void collect(const std::string& prefix, StateRegistry& reg);

  Conv1d gamma_proj;
  Conv1d beta_proj;
  ad::BatchNormStats stats;
};

// ---- Optimizer ---------------------------------------------------------------------

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Parameters without a gradient are skipped.
class Adam {
 public:
  Adam(std::vector<NamedParam> params, AdamConfig config);

  // Throws NumericError naming the parameter if any gradient is non-finite.
  void step();
  void zero_grad();
  void set_lr(double lr) { config_.lr = lr; }
  const AdamConfig& config() const { return config_; }

  std::uint64_t steps() const { return t_; }
  void set_steps(std::uint64_t t) { t_ = t; }
  // First and second moments as named buffers ("<prefix>m.<name>", ...).
  void collect(const std::string& prefix, StateRegistry& reg);

 private:
  std::vector<NamedParam> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  std::uint64_t t_ = 0;
};

}  // namespace regen::nn

#endif  // REGEN_NN_H_

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

// Unconditional waveform discriminator: a stack of unpadded, spectrally
// normalized 1-D convolutions with leaky ReLU between layers and a linear
// single-channel output giving one score per position.

#ifndef REGEN_DISCRIMINATOR_H_
#define REGEN_DISCRIMINATOR_H_

#include <cstdint>
#include <random>
#include <vector>

#include "json.hpp"
#include "regen/audio_io.h"
#include "regen/nn.h"
#include "regen/tensor.h"

namespace regen {

struct DiscriminatorConfig {
  std::vector<int> filters{16, 64, 256, 1024, 1024, 1024, 1};
  std::vector<int> kernels{15, 41, 41, 41, 41, 5, 3};
  std::vector<int> strides{1, 4, 4, 4, 4, 1, 1};
  double leaky_slope = 0.2;
  bool spectral_norm = true;

  // Narrow filters for desk-scale training; kernels and strides unchanged.
  static DiscriminatorConfig Toy();

  std::size_t num_layers() const { return filters.size(); }
  // Throws ArgumentError unless the three lists have equal nonzero length,
  // entries are positive, and the last layer has one filter.
  void validate() const;

  // Smallest input with at least one score; equals the stack's receptive
  // field.
  std::size_t min_input_length() const;
  // Score count for an input of `n` samples (0 when n is too short).
  std::size_t output_length(std::size_t n) const;

  nlohmann::json to_json() const;
  static DiscriminatorConfig from_json(const nlohmann::json& j);
};

class Discriminator {
 public:
  Discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return config_; }

  // x [B, 1, T] -> scores [B, 1, T']. Throws ArgumentError naming the
  // minimum length when T is too short.
  ad::Tensor forward(const ad::Tensor& x) const;
  // Scores of one waveform.
  std::vector<double> discriminate(const Waveform& x) const;

  void power_iterate();
  nn::StateRegistry state();
  std::size_t num_parameters();
  // Zeroes the last layer's weight and bias.
  void zero_last_layer();

 private:
  DiscriminatorConfig config_;
  std::vector<nn::Conv1d> layers_;
};

}  // namespace regen

#endif  // REGEN_DISCRIMINATOR_H_

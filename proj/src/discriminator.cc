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

#include "regen/discriminator.h"

#include <algorithm>

#include "regen/error.h"

namespace regen {

DiscriminatorConfig DiscriminatorConfig::Toy() {
  DiscriminatorConfig c;
  c.filters = {16, 32, 32, 64, 64, 64, 1};
  return c;
}

void DiscriminatorConfig::validate() const {
  if (filters.empty() || kernels.size() != filters.size() ||
      strides.size() != filters.size()) {
    throw ArgumentError("discriminator filters, kernels and strides must have "
                        "the same nonzero length");
  }
  for (std::size_t i = 0; i < filters.size(); ++i) {
    if (filters[i] <= 0 || kernels[i] <= 0 || strides[i] <= 0) {
      throw ArgumentError("discriminator layer " + std::to_string(i) +
                          " has a non-positive size");
    }
  }
  if (filters.back() != 1) {
    throw ArgumentError("the last discriminator layer must have one filter");
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw ArgumentError("leaky slope must lie in [0, 1)");
  }
}

std::size_t DiscriminatorConfig::min_input_length() const {
  std::size_t field = 1;
  std::size_t jump = 1;
  for (std::size_t i = 0; i < num_layers(); ++i) {
    field += static_cast<std::size_t>(kernels[i] - 1) * jump;
    jump *= static_cast<std::size_t>(strides[i]);
  }
  return field;
}

std::size_t DiscriminatorConfig::output_length(std::size_t n) const {
  for (std::size_t i = 0; i < num_layers(); ++i) {
    const auto k = static_cast<std::size_t>(kernels[i]);
    if (n < k) return 0;
    n = (n - k) / static_cast<std::size_t>(strides[i]) + 1;
  }
  return n;
}

nlohmann::json DiscriminatorConfig::to_json() const {
  return {{"filters", filters},
          {"kernels", kernels},
          {"strides", strides},
          {"leaky_slope", leaky_slope},
          {"spectral_norm", spectral_norm}};
}

DiscriminatorConfig DiscriminatorConfig::from_json(const nlohmann::json& j) {
  DiscriminatorConfig c;
  try {
    c.filters = j.value("filters", c.filters);
    c.kernels = j.value("kernels", c.kernels);
    c.strides = j.value("strides", c.strides);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.spectral_norm = j.value("spectral_norm", c.spectral_norm);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("discriminator config: ") + e.what());
  }
  return c;
}

Discriminator::Discriminator(const DiscriminatorConfig& config,
                             std::uint64_t seed)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  std::size_t in = 1;
  for (std::size_t i = 0; i < config_.num_layers(); ++i) {
    nn::Conv1dSpec spec;
    spec.in_channels = in;
    spec.out_channels = static_cast<std::size_t>(config_.filters[i]);
    spec.kernel = static_cast<std::size_t>(config_.kernels[i]);
    spec.stride = static_cast<std::size_t>(config_.strides[i]);
    spec.padding = nn::Padding::kValid;
    spec.spectral_norm = config_.spectral_norm;
    layers_.emplace_back(spec, rng);
    in = spec.out_channels;
  }
}

ad::Tensor Discriminator::forward(const ad::Tensor& x) const {
  if (x.rank() != 3 || x.dim(1) != 1) {
    throw ShapeError("discriminator expects [B, 1, T], got " +
                     ad::shape_str(x.shape()));
  }
  const std::size_t min_len = config_.min_input_length();
  if (x.dim(2) < min_len) {
    throw ArgumentError("discriminator input has " + std::to_string(x.dim(2)) +
                        " samples; the minimum is " + std::to_string(min_len));
  }
  ad::Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(h);
    if (i + 1 < layers_.size()) h = ad::leaky_relu(h, config_.leaky_slope);
  }
  return h;
}

std::vector<double> Discriminator::discriminate(const Waveform& x) const {
  ad::NoGradGuard no_grad;
  const auto in = ad::Tensor::from({1, 1, x.size()}, x.samples);
  return forward(in).values();
}

void Discriminator::power_iterate() {
  for (auto& l : layers_) l.power_iterate();
}

nn::StateRegistry Discriminator::state() {
  nn::StateRegistry reg;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i].collect("d.layer" + std::to_string(i) + ".", reg);
  }
  return reg;
}

std::size_t Discriminator::num_parameters() { return state().num_parameters(); }

void Discriminator::zero_last_layer() {
  auto& last = layers_.back();
  std::fill(last.weight.mutable_values().begin(), last.weight.mutable_values().end(), 0.0);
  if (last.bias.defined()) {
    std::fill(last.bias.mutable_values().begin(), last.bias.mutable_values().end(), 0.0);
  }
}

}  // namespace regen

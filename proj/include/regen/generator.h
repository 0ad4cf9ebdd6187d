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

// Conditional convolutional decoder: 250 Hz conditioning frames plus a global
// [z | identity] vector to a 24 kHz waveform.
//
//   frames [B, D+3, F] -> conv -> GBlock x N -> ReLU -> conv -> tanh
//
// Each GBlock holds two residual units of two convolutions (dilations
// d0,d1 and d2,d3), each convolution preceded by conditional batch norm and
// ReLU. The block upsamples by nearest repetition before its first
// convolution; the shortcut repeats and, when widths differ, applies a 1x1
// convolution.

#ifndef REGEN_GENERATOR_H_
#define REGEN_GENERATOR_H_

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "regen/audio_io.h"
#include "regen/features.h"
#include "regen/nn.h"
#include "regen/tensor.h"

namespace regen {

struct GeneratorConfig {
  int content_dim = kMelBands;
  std::vector<int> channel_widths{768, 768, 384, 384, 256, 128, 96};
  std::vector<int> upsample_factors{1, 1, 2, 2, 2, 3, 4};
  std::vector<int> dilations{1, 2, 4, 8};
  int kernel = 3;
  int z_dim = 128;
  int id_dim = kIdentityDim;
  int cond_proj_dim = 128;
  bool causal = false;
  bool spectral_norm = true;

  // Narrow widths for desk-scale training.
  static GeneratorConfig Toy();

  int input_channels() const { return content_dim + 3; }
  int total_upsample() const;
  std::size_t num_blocks() const { return channel_widths.size(); }

  // Throws ArgumentError on non-positive sizes, mismatched list lengths, zero
  // blocks, an even kernel, or a dilation list that is not four long.
  void validate() const;
  // Additionally requires seven blocks whose factors multiply to 96.
  void validate_for_pipeline() const;

  nlohmann::json to_json() const;
  static GeneratorConfig from_json(const nlohmann::json& j);
};

struct BlockField {
  std::size_t samples = 0;  // at the block's input rate
  double rate_hz = 0.0;
  double ms = 0.0;
};

struct ReceptiveField {
  std::vector<BlockField> blocks;
  std::size_t frames = 0;         // input frames reaching one output sample
  std::size_t past_frames = 0;    // before the output sample's own frame
  std::size_t future_frames = 0;  // after it (0 when causal)
  double ms = 0.0;                // frames at 250 Hz
  std::size_t output_samples = 0; // frames expressed at 24 kHz
};

// Exact dependency span from the kernel, dilation, and upsampling schedule,
// taking the worst case over output phases.
ReceptiveField receptive_field(const GeneratorConfig& config);

// Trainable parameter count (running statistics and power-iteration vectors
// are buffers, not parameters).
std::size_t count_parameters(const GeneratorConfig& config);

class GeneratorStream;

// Applies convolutions either with padding (whole signal) or through
// per-layer history caches (streaming).
class ConvContext {
 public:
  virtual ~ConvContext() = default;
  virtual ad::Tensor apply(const nn::Conv1d& layer, const ad::Tensor& x) = 0;
};

class GBlock {
 public:
  GBlock(std::size_t in_channels, std::size_t out_channels, std::size_t factor,
         const GeneratorConfig& config, std::mt19937_64& rng);

  // x [B, in, T], cond [B, P, F] with T a multiple of F.
  ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& cond,
                     bool training, ConvContext& convs);
  ad::Tensor forward(const ad::Tensor& x, const ad::Tensor& cond,
                     bool training);

  void collect(const std::string& prefix, nn::StateRegistry& reg);
  void power_iterate();
  std::size_t factor() const { return factor_; }
  // Convolutions in application order.
  std::vector<const nn::Conv1d*> convs() const;

 private:
  std::size_t factor_;
  nn::CondBatchNorm bn1_, bn2_, bn3_, bn4_;
  nn::Conv1d conv1_, conv2_, conv3_, conv4_;
  nn::Conv1d shortcut_;
  bool has_shortcut_;
};

class Generator {
 public:
  Generator(const GeneratorConfig& config, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }

  // frames [B, D+3, F], zid [B, z_dim + id_dim, F] -> [B, 1, 96 F].
  ad::Tensor forward(const ad::Tensor& frames, const ad::Tensor& zid,
                     bool training);

  // Inference-mode synthesis of one utterance at 24 kHz. Uses the per-frame
  // identity rows when the track carries them. Throws ShapeError when the
  // track or z does not match the configuration.
  Waveform generate(const ConditioningTrack& cond, const std::vector<double>& z);

  // One power iteration on every spectrally normalized convolution.
  void power_iterate();

  nn::StateRegistry state();
  std::size_t num_parameters();

  // Streaming synthesis; requires a causal configuration (ModeError).
  std::unique_ptr<GeneratorStream> open_stream(std::vector<double> z,
                                               std::vector<double> identity);

  // Input tensors for one utterance: frames [1, D+3, F] and zid [1, z+id, F].
  std::pair<ad::Tensor, ad::Tensor> make_inputs(
      const ConditioningTrack& cond, const std::vector<double>& z) const;

 private:
  friend class GeneratorStream;
  ad::Tensor forward_impl(const ad::Tensor& frames, const ad::Tensor& zid,
                          bool training, ConvContext& convs);
  std::vector<const nn::Conv1d*> all_convs() const;

  GeneratorConfig config_;
  nn::Conv1d cond_proj_;
  nn::Conv1d pre_;
  std::vector<GBlock> blocks_;
  nn::Conv1d post_;
};

// Per-stream state of a causal generator: one history buffer per
// convolution. Outputs match Generator::generate on the whole track.
class GeneratorStream {
 public:
  GeneratorStream(Generator* gen, std::vector<double> z,
                  std::vector<double> identity);

  // Consumes conditioning rows [n x (D+3)] and returns 96 n samples.
  // `identity_rows` is [n x id_dim] or empty for the fixed identity.
  std::vector<double> push(const Matrix& frames, const Matrix& identity_rows);
  void reset();

 private:
  class Cache;
  Generator* gen_;
  std::vector<double> z_;
  std::vector<double> identity_;
  std::shared_ptr<Cache> cache_;
};

}  // namespace regen

#endif  // REGEN_GENERATOR_H_

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


// Desk-scale adversarial training of the generator and discriminator.
//
// Each step: one power iteration on every normalized layer, fresh z1 and z2
// per item, one discriminator update on real targets against detached draws,
// then one generator update on L_sed + lambda * L_adv.

#ifndef REGEN_TRAINER_H_
#define REGEN_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "regen/audio_io.h"
#include "regen/checkpoint.h"
#include "regen/discriminator.h"
#include "regen/features.h"
#include "regen/generator.h"
#include "regen/losses.h"
#include "regen/nn.h"
#include "regen/random.h"

namespace regen {

enum class DiscriminatorMode { kTrain, kFrozen, kNone };

struct TrainConfig {
  std::int64_t steps = 500;
  int batch = 1;
  double lr_g = 1e-4;
  double lr_d = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  double lambda = losses::kDefaultLambda;
  // Crop length at 24 kHz; a whole number of frames.
  std::size_t clip_samples = 8160;
  DiscriminatorMode discriminator = DiscriminatorMode::kTrain;

  std::size_t clip_frames(int samples_per_frame) const {
    return clip_samples / samples_per_frame;
  }
  // Throws ArgumentError on non-positive steps or batch, learning rates
  // outside [0, 0.1), or a crop that is not a whole number of frames.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// One aligned utterance: conditioning frames and the 24 kHz target covering
// exactly frames * 96 samples.
struct TrainExample {
  ConditioningTrack cond;
  Waveform target;
};

// Extracts features from the 16 kHz input and trims or zero-pads the target
// to the frame grid.
TrainExample make_example(const Waveform& input, const Waveform& target,
                          FeatureEncoder& encoder, FeatureMode mode);

struct TrainState {
  TrainState(const GeneratorConfig& g, const DiscriminatorConfig& d,
             const TrainConfig& t);

  GeneratorConfig generator_config;
  DiscriminatorConfig discriminator_config;
  TrainConfig config;
  std::int64_t step = 0;
  std::unique_ptr<Generator> generator;
  std::unique_ptr<Discriminator> discriminator;
  std::unique_ptr<nn::Adam> opt_g;
  std::unique_ptr<nn::Adam> opt_d;
  Rng rng;

  // Every tensor of the state under stable names.
  nn::StateRegistry registry();
};

// Runs one step on crops drawn from `examples`. Throws NumericError with the
// step number on a non-finite loss or gradient.
losses::LossReport train_step(TrainState& state,
                              const std::vector<TrainExample>& examples);

// Runs `steps` steps, writing one JSON line per step to `log` when given.
std::vector<losses::LossReport> train(TrainState& state,
                                      const std::vector<TrainExample>& examples,
                                      std::int64_t steps, std::ostream* log);

Checkpoint to_checkpoint(TrainState& state);
std::unique_ptr<TrainState> from_checkpoint(const Checkpoint& ckpt);
void save_checkpoint(TrainState& state, const std::filesystem::path& path);
// Throws FormatVersionError or ParseError; nothing is built from a bad file.
std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path);

// Generator alone from any checkpoint carrying generator tensors.
std::unique_ptr<Generator> load_generator(const Checkpoint& ckpt);

// Deterministic synthetic corpus for the overfit test: a 1 s harmonic tone
// with vibrato over a low noise floor at 24 kHz, and its 16 kHz version.
std::pair<Waveform, Waveform> synthetic_clip(double seconds, std::uint64_t seed);

}  // namespace regen

#endif  // REGEN_TRAINER_H_

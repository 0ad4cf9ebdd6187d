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


// Versioned JSON configuration covering every module, validated across
// module boundaries at load time.

#ifndef REGEN_CONFIG_H_
#define REGEN_CONFIG_H_

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "regen/discriminator.h"
#include "regen/features.h"
#include "regen/generator.h"
#include "regen/trainer.h"

namespace regen {

inline constexpr int kConfigVersion = 1;

struct StreamingOptions {
  double chunk_ms = 20.0;
  bool threaded = false;
  std::size_t queue_capacity = 4;
};

struct PipelineConfig {
  EncoderConfig encoder;
  // Toy widths with causal convolutions so one model serves both modes.
  GeneratorConfig generator = [] {
    GeneratorConfig g = GeneratorConfig::Toy();
    g.causal = true;
    return g;
  }();
  DiscriminatorConfig discriminator = DiscriminatorConfig::Toy();
  TrainConfig train;
  StreamingOptions streaming;
  std::uint64_t seed = 0;

  // Throws ArgumentError when modules disagree: content width, identity
  // width, a schedule that does not upsample 250 Hz to 24 kHz, or a chunk
  // that is not a whole number of samples.
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys take defaults. Throws FormatVersionError for an unknown
  // config_version and ParseError for malformed JSON.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace regen

#endif  // REGEN_CONFIG_H_

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


#include "regen/config.h"

#include <cmath>
#include <string>

#include "regen/audio_io.h"
#include "regen/error.h"

namespace regen {

void PipelineConfig::validate() const {
  generator.validate();
  generator.validate_for_pipeline();
  discriminator.validate();
  train.validate();
  const FeatureEncoder enc(encoder);  // rejects unknown providers
  if (static_cast<std::size_t>(generator.content_dim) != enc.content_dim()) {
    throw ArgumentError("generator content_dim " + std::to_string(generator.content_dim) +
                        " does not match the content provider's " +
                        std::to_string(enc.content_dim()));
  }
  if (generator.id_dim != kIdentityDim) {
    throw ArgumentError("generator id_dim must be " + std::to_string(kIdentityDim));
  }
  const double samples = streaming.chunk_ms * kInputRateHz / 1000.0;
  if (!(samples >= 1.0) || std::floor(samples) != samples) {
    throw ArgumentError("chunk_ms must be positive and span a whole number of samples");
  }
  if (streaming.queue_capacity == 0) {
    throw ArgumentError("queue_capacity must be positive");
  }
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"config_version", kConfigVersion},
          {"seed", seed},
          {"encoder",
           {{"pre_enhancer", encoder.pre_enhancer},
            {"gate_threshold", encoder.gate_threshold},
            {"content", encoder.content},
            {"identity", encoder.identity},
            {"identity_seed", encoder.identity_seed},
            {"threads", encoder.threads}}},
          {"generator", generator.to_json()},
          {"discriminator", discriminator.to_json()},
          {"train", train.to_json()},
          {"streaming",
           {{"chunk_ms", streaming.chunk_ms},
            {"threaded", streaming.threaded},
            {"queue_capacity", streaming.queue_capacity}}}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  const int version = j.value("config_version", -1);
  if (version != kConfigVersion) {
    throw FormatVersionError("config_version " + std::to_string(version) +
                             " is not supported (expected " +
                             std::to_string(kConfigVersion) + ")");
  }
  PipelineConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      c.encoder.pre_enhancer = e.value("pre_enhancer", c.encoder.pre_enhancer);
      c.encoder.gate_threshold = e.value("gate_threshold", c.encoder.gate_threshold);
      c.encoder.content = e.value("content", c.encoder.content);
      c.encoder.identity = e.value("identity", c.encoder.identity);
      c.encoder.identity_seed = e.value("identity_seed", c.encoder.identity_seed);
      c.encoder.threads = e.value("threads", c.encoder.threads);
    }
    if (j.contains("generator")) c.generator = GeneratorConfig::from_json(j.at("generator"));
    if (j.contains("discriminator")) {
      c.discriminator = DiscriminatorConfig::from_json(j.at("discriminator"));
    }
    if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
    if (j.contains("streaming")) {
      const auto& s = j.at("streaming");
      c.streaming.chunk_ms = s.value("chunk_ms", c.streaming.chunk_ms);
      c.streaming.threaded = s.value("threaded", c.streaming.threaded);
      c.streaming.queue_capacity = s.value("queue_capacity", c.streaming.queue_capacity);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace regen

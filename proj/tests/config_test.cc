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


#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "regen/config.h"
#include "regen/error.h"

namespace regen {
namespace {

TEST(Config, DefaultsValidateAndRoundTrip) {
  const PipelineConfig c;
  EXPECT_NO_THROW(c.validate());
  const nlohmann::json j = c.to_json();
  EXPECT_EQ(j.at("config_version"), kConfigVersion);
  EXPECT_EQ(PipelineConfig::from_json(j).to_json(), j);
}

TEST(Config, MissingKeysTakeDefaults) {
  const PipelineConfig c = PipelineConfig::from_json({{"config_version", 1}, {"seed", 9}});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.to_json().at("generator"), PipelineConfig{}.to_json().at("generator"));
}

TEST(Config, VersionIsRequired) {
  EXPECT_THROW(PipelineConfig::from_json({{"seed", 1}}), FormatVersionError);
  EXPECT_THROW(PipelineConfig::from_json({{"config_version", 2}}), FormatVersionError);
  EXPECT_THROW(PipelineConfig::from_json(nlohmann::json::array()), ParseError);
}

TEST(Config, CrossModuleMismatchesAreRejected) {
  PipelineConfig c;
  c.generator.content_dim = 32;
  EXPECT_THROW(c.validate(), ArgumentError);

  c = PipelineConfig{};
  c.generator.upsample_factors.back() = 2;  // product 48
  EXPECT_THROW(c.validate(), ArgumentError);

  c = PipelineConfig{};
  c.encoder.pre_enhancer = "wiener";
  EXPECT_THROW(c.validate(), ArgumentError);

  c = PipelineConfig{};
  c.streaming.chunk_ms = 0.01;  // 0.16 samples
  EXPECT_THROW(c.validate(), ArgumentError);
  c.streaming.chunk_ms = 10.0;
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, WrongTypesAndBadFilesAreParseErrors) {
  nlohmann::json j = PipelineConfig{}.to_json();
  j["streaming"]["chunk_ms"] = "twenty";
  EXPECT_THROW(PipelineConfig::from_json(j), ParseError);

  const auto path = std::filesystem::temp_directory_path() / "regen_config_test.json";
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(PipelineConfig::load(path), ParseError);
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace regen

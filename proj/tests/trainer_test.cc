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
#include <sstream>

#include "regen/checkpoint.h"
#include "regen/error.h"
#include "regen/trainer.h"

namespace regen {
namespace {

namespace fs = std::filesystem;

// Shorter crops keep each step cheap; 54 frames still exceed the
// discriminator's minimum input.
TrainConfig quick_config(std::uint64_t seed = 3) {
  TrainConfig c;
  c.seed = seed;
  c.clip_samples = 54 * 96;
  return c;
}

const std::vector<TrainExample>& corpus() {
  static const std::vector<TrainExample> examples = [] {
    auto [input, target] = synthetic_clip(1.0, 1);
    FeatureEncoder encoder;
    return std::vector<TrainExample>{make_example(input, target, encoder, FeatureMode::kOffline)};
  }();
  return examples;
}

std::unique_ptr<TrainState> fresh(const TrainConfig& c) {
  return std::make_unique<TrainState>(GeneratorConfig::Toy(), DiscriminatorConfig::Toy(), c);
}

std::vector<std::vector<double>> snapshot(const nn::StateRegistry& reg) {
  std::vector<std::vector<double>> out;
  for (const auto& p : reg.params) out.push_back(p.tensor.values());
  return out;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("regen_trainer_test_" + name);
}

TEST(TrainConfig, ValidationAndJson) {
  TrainConfig c = quick_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& t) { t.steps = 0; }, [](TrainConfig& t) { t.batch = 0; },
           [](TrainConfig& t) { t.lr_g = 0.5; }, [](TrainConfig& t) { t.lr_d = -1e-3; },
           [](TrainConfig& t) { t.clip_samples = 8161; },
           [](TrainConfig& t) { t.clip_samples = 960; }}) {
    TrainConfig bad = c;
    mutate(bad);
    EXPECT_THROW(bad.validate(), ArgumentError);
  }
}

TEST(TrainExample, TargetAlignedToFrames) {
  const TrainExample& ex = corpus().front();
  EXPECT_EQ(ex.cond.frames(), 250u);
  EXPECT_EQ(ex.target.size(), 250u * 96);
  EXPECT_EQ(ex.target.sample_rate_hz, kOutputRateHz);
}

TEST(SyntheticClip, DeterministicAndAtBothRates) {
  const auto [a_in, a_out] = synthetic_clip(1.0, 9);
  const auto [b_in, b_out] = synthetic_clip(1.0, 9);
  EXPECT_EQ(a_out, b_out);
  EXPECT_EQ(a_in.sample_rate_hz, kInputRateHz);
  EXPECT_EQ(a_out.size(), 24000u);
  EXPECT_NO_THROW(a_out.validate());
  EXPECT_NE(synthetic_clip(1.0, 10).second, a_out);
}

TEST(TrainStep, ZeroLearningRateLeavesParametersBitIdentical) {
  TrainConfig c = quick_config();
  c.lr_g = 0.0;
  c.lr_d = 0.0;
  auto s = fresh(c);
  const auto g_before = snapshot(s->generator->state());
  const auto d_before = snapshot(s->discriminator->state());
  train_step(*s, corpus());
  EXPECT_EQ(snapshot(s->generator->state()), g_before);
  EXPECT_EQ(snapshot(s->discriminator->state()), d_before);
  EXPECT_EQ(s->step, 1);
}

TEST(TrainStep, ReportIsConsistent) {
  auto s = fresh(quick_config());
  const losses::LossReport r = train_step(*s, corpus());
  EXPECT_NO_THROW(r.validate());
  EXPECT_EQ(r.l_g, r.l_sed + 4.0 * r.l_adv);
  EXPECT_EQ(r.l_spec_per_scale.size(), 6u);
  double mean = 0.0;
  for (const auto& [m, v] : r.l_spec_per_scale) mean += v / 6.0;
  EXPECT_NEAR(mean, r.l_spec, 1e-9);
  EXPECT_GT(r.l_d, 0.0);
}

TEST(TrainStep, FixedSeedReplaysExactly) {
  auto a = fresh(quick_config(5)), b = fresh(quick_config(5));
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(train_step(*a, corpus()), train_step(*b, corpus())) << i;
  }
  EXPECT_EQ(snapshot(a->registry()), snapshot(b->registry()));
}

TEST(TrainStep, GeneratorUpdateLeavesDiscriminatorAlone) {
  TrainConfig c = quick_config();
  c.lr_d = 0.0;
  auto s = fresh(c);
  const auto d_before = snapshot(s->discriminator->state());
  const auto g_before = snapshot(s->generator->state());
  train_step(*s, corpus());
  EXPECT_EQ(snapshot(s->discriminator->state()), d_before);
  EXPECT_NE(snapshot(s->generator->state()), g_before);
}

TEST(TrainStep, DiscriminatorUpdateLeavesGeneratorAlone) {
  TrainConfig c = quick_config();
  c.lr_g = 0.0;
  auto s = fresh(c);
  const auto d_before = snapshot(s->discriminator->state());
  const auto g_before = snapshot(s->generator->state());
  train_step(*s, corpus());
  EXPECT_EQ(snapshot(s->generator->state()), g_before);
  EXPECT_NE(snapshot(s->discriminator->state()), d_before);
}

TEST(TrainStep, ZeroLambdaFrozenDiscriminatorMatchesNoDiscriminator) {
  TrainConfig frozen = quick_config(8);
  frozen.lambda = 0.0;
  frozen.discriminator = DiscriminatorMode::kFrozen;
  TrainConfig none = frozen;
  none.discriminator = DiscriminatorMode::kNone;
  auto a = fresh(frozen), b = fresh(none);
  a->discriminator->zero_last_layer();
  for (int i = 0; i < 3; ++i) {
    const auto ra = train_step(*a, corpus());
    const auto rb = train_step(*b, corpus());
    EXPECT_EQ(ra.l_sed, rb.l_sed);
    EXPECT_EQ(ra.l_spec, rb.l_spec);
    EXPECT_EQ(ra.l_g, rb.l_g);
    EXPECT_EQ(rb.l_adv, 0.0);
  }
  EXPECT_EQ(snapshot(a->generator->state()), snapshot(b->generator->state()));
}

TEST(TrainStep, NonFiniteParameterAbortsWithStep) {
  auto s = fresh(quick_config());
  s->generator->state().params.front().tensor.mutable_values()[0] = std::nan("");
  try {
    train_step(*s, corpus());
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos) << e.what();
  }
}

TEST(TrainStep, RejectsShortExamples) {
  auto s = fresh(quick_config());
  TrainExample ex = corpus().front();
  ex.cond.frame_matrix = Matrix(10, ex.cond.frame_matrix.cols);
  ex.target.samples.resize(960);
  EXPECT_THROW(train_step(*s, {ex}), ArgumentError);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  auto s = fresh(quick_config());
  train_step(*s, corpus());
  const auto first = encode_checkpoint(to_checkpoint(*s));
  auto loaded = from_checkpoint(decode_checkpoint(first));
  EXPECT_EQ(encode_checkpoint(to_checkpoint(*loaded)), first);
  EXPECT_EQ(loaded->step, 1);
}

TEST(Checkpoint, ResumeMatchesUnbrokenRun) {
  auto unbroken = fresh(quick_config(4));
  auto first_half = fresh(quick_config(4));
  for (int i = 0; i < 2; ++i) {
    train_step(*unbroken, corpus());
    train_step(*first_half, corpus());
  }
  const fs::path path = temp_path("resume.rgnc");
  save_checkpoint(*first_half, path);
  first_half.reset();
  auto resumed = load_checkpoint(path);
  fs::remove(path);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(train_step(*resumed, corpus()), train_step(*unbroken, corpus())) << i;
  }
}

TEST(Checkpoint, TruncatedFilesFailCleanly) {
  auto s = fresh(quick_config());
  const auto bytes = encode_checkpoint(to_checkpoint(*s));
  for (std::size_t len : {std::size_t{0}, std::size_t{3}, std::size_t{9}, std::size_t{100},
                          bytes.size() / 2, bytes.size() - 1}) {
    EXPECT_THROW(decode_checkpoint(std::span(bytes.data(), len)), ParseError) << len;
  }
  const fs::path path = temp_path("truncated.rgnc");
  write_file_atomic(path, std::span(bytes.data(), bytes.size() - 4));
  EXPECT_THROW(load_checkpoint(path), ParseError);
  fs::remove(path);
}

TEST(Checkpoint, VersionAndTableChecks) {
  Checkpoint c;
  c.metadata = {{"k", 1}};
  c.tensors.push_back({"a", {2, 2}, {1, 2, 3, 4}});
  auto bytes = encode_checkpoint(c);
  const Checkpoint back = decode_checkpoint(bytes);
  ASSERT_NE(back.find("a"), nullptr);
  EXPECT_EQ(back.find("a")->data, c.tensors[0].data);
  EXPECT_EQ(back.metadata, c.metadata);
  auto wrong_version = bytes;
  wrong_version[4] = 2;
  EXPECT_THROW(decode_checkpoint(wrong_version), FormatVersionError);
  auto wrong_magic = bytes;
  wrong_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(wrong_magic), ParseError);
  c.tensors.push_back({"a", {1}, {5}});
  EXPECT_THROW(decode_checkpoint(encode_checkpoint(c)), ParseError);
  c.tensors.pop_back();
  c.tensors.push_back({"b", {3}, {1, 2}});
  EXPECT_ANY_THROW(decode_checkpoint(encode_checkpoint(c)));
}

TEST(Checkpoint, ImportChecksEveryTensorFirst) {
  Generator g(GeneratorConfig::Toy(), 1);
  Checkpoint c;
  export_state(g.state(), c);
  Generator other(GeneratorConfig::Toy(), 2);
  const auto before = snapshot(other.state());
  Checkpoint partial = c;
  partial.tensors.pop_back();
  auto reg = other.state();
  EXPECT_THROW(import_state(partial, reg), ParseError);
  EXPECT_EQ(snapshot(other.state()), before);
  import_state(c, reg);
  EXPECT_NE(snapshot(other.state()), before);
}

TEST(Train, WritesOneJsonLinePerStep) {
  auto s = fresh(quick_config());
  std::ostringstream log;
  const auto reports = train(*s, corpus(), 2, &log);
  ASSERT_EQ(reports.size(), 2u);
  std::istringstream lines(log.str());
  std::string line;
  int n = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("step"), n);
    EXPECT_TRUE(j.contains("l_spec_per_scale"));
    ++n;
  }
  EXPECT_EQ(n, 2);
}

}  // namespace
}  // namespace regen

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

#include <chrono>
#include <numeric>
#include <random>

#include "regen/discriminator.h"
#include "regen/error.h"
#include "regen/generator.h"

namespace regen {
namespace {

ad::Tensor randn(ad::Shape shape, std::mt19937_64& gen) {
  std::normal_distribution<double> nd;
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(gen);
  return ad::Tensor::from(std::move(shape), std::move(v));
}

ConditioningTrack random_track(std::size_t frames, int content_dim, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  ConditioningTrack t;
  t.frame_matrix = Matrix(frames, static_cast<std::size_t>(content_dim) + 3);
  for (double& v : t.frame_matrix.data) v = 0.5 * nd(gen);
  t.identity.values.assign(kIdentityDim, 1.0 / std::sqrt(double(kIdentityDim)));
  return t;
}

std::vector<double> z_of(int dim, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::vector<double> z(dim);
  for (double& v : z) v = nd(gen);
  return z;
}

TEST(GeneratorConfig, UpsamplingReachesOutputRate) {
  const GeneratorConfig full;
  EXPECT_EQ(full.total_upsample(), 96);
  EXPECT_EQ(std::accumulate(full.upsample_factors.begin(), full.upsample_factors.end(), 1,
                            std::multiplies<>()),
            kOutputHop);
  EXPECT_EQ(full.num_blocks(), 7u);
  EXPECT_NO_THROW(full.validate_for_pipeline());
  EXPECT_NO_THROW(GeneratorConfig::Toy().validate_for_pipeline());
  GeneratorConfig bad = full;
  bad.upsample_factors.back() = 5;
  EXPECT_THROW(bad.validate_for_pipeline(), ArgumentError);
  bad = full;
  bad.kernel = 4;
  EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(GeneratorConfig, JsonRoundTrip) {
  GeneratorConfig c = GeneratorConfig::Toy();
  c.causal = true;
  const GeneratorConfig back = GeneratorConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Generator, TwoHundredFiftyFramesGiveOneSecond) {
  for (const GeneratorConfig& cfg : {GeneratorConfig::Toy(), GeneratorConfig()}) {
    Generator g(cfg, 1);
    const Waveform w = g.generate(random_track(250, cfg.content_dim, 2), z_of(cfg.z_dim, 3));
    EXPECT_EQ(w.size(), 24000u);
    EXPECT_EQ(w.sample_rate_hz, kOutputRateHz);
    for (double v : w.samples) ASSERT_LE(std::abs(v), 1.0);
  }
}

TEST(Generator, RejectsMismatchedInputs) {
  Generator g(GeneratorConfig::Toy(), 1);
  EXPECT_THROW(g.generate(random_track(20, 12, 1), z_of(128, 1)), ShapeError);
  EXPECT_THROW(g.generate(random_track(20, kMelBands, 1), z_of(7, 1)), ShapeError);
}

TEST(Generator, ParameterCountMatchesFormula) {
  for (const GeneratorConfig& cfg : {GeneratorConfig::Toy(), GeneratorConfig()}) {
    Generator g(cfg, 0);
    EXPECT_EQ(g.num_parameters(), count_parameters(cfg));
  }
}

TEST(ReceptiveField, FirstBlockSpansThirtyOneFrames) {
  const ReceptiveField rf = receptive_field(GeneratorConfig());
  ASSERT_EQ(rf.blocks.size(), 7u);
  EXPECT_EQ(rf.blocks[0].samples, 31u);
  EXPECT_DOUBLE_EQ(rf.blocks[0].rate_hz, 250.0);
  EXPECT_DOUBLE_EQ(rf.blocks[0].ms, 124.0);
}

// Indices of outputs of `f` that change when input time step `t` changes.
template <typename F>
std::pair<std::size_t, std::size_t> reach(F f, ad::Tensor x, std::size_t t) {
  const ad::Tensor before = f(x);
  const std::size_t channels = x.dim(1), len = x.dim(2);
  for (std::size_t c = 0; c < channels; ++c) x.mutable_values()[c * len + t] += 1.0 + c;
  const ad::Tensor after = f(x);
  const std::size_t out_len = before.dim(2), out_ch = before.dim(1);
  std::size_t lo = out_len, hi = 0;
  for (std::size_t c = 0; c < out_ch; ++c) {
    for (std::size_t i = 0; i < out_len; ++i) {
      if (before.values()[c * out_len + i] != after.values()[c * out_len + i]) {
        lo = std::min(lo, i);
        hi = std::max(hi, i);
      }
    }
  }
  return {lo, hi};
}

TEST(ReceptiveField, GBlockPerturbationConfirmsThirtyOneFrames) {
  GeneratorConfig cfg = GeneratorConfig::Toy();
  std::mt19937_64 gen(5);
  GBlock block(16, 16, 1, cfg, gen);
  const ad::Tensor cond = randn({1, static_cast<std::size_t>(cfg.cond_proj_dim), 101}, gen);
  const ad::Tensor x = randn({1, 16, 101}, gen);
  const auto [lo, hi] = reach([&](const ad::Tensor& in) { return block.forward(in, cond, false); },
                              x, 50);
  EXPECT_EQ(hi - lo + 1, 31u);
  EXPECT_EQ(lo, 35u);
}

TEST(ReceptiveField, WholeGeneratorMatchesPerturbation) {
  GeneratorConfig cfg = GeneratorConfig::Toy();
  const ReceptiveField rf = receptive_field(cfg);
  Generator g(cfg, 4);
  const ConditioningTrack track = random_track(160, cfg.content_dim, 6);
  const auto z = z_of(cfg.z_dim, 7);
  auto [frames, zid] = g.make_inputs(track, z);
  const ad::Tensor base = g.forward(frames, zid, false);
  // Frames that influence output sample s, found one frame at a time.
  const std::size_t s = 80 * 96 + 40;
  std::size_t first = 160, last = 0;
  for (std::size_t f = 0; f < 160; ++f) {
    ad::Tensor p = frames.detach();
    for (std::size_t c = 0; c < p.dim(1); ++c) p.mutable_values()[c * 160 + f] += 1.0;
    const ad::Tensor out = g.forward(p, zid, false);
    if (out.values()[s] != base.values()[s]) {
      first = std::min(first, f);
      last = std::max(last, f);
    }
  }
  EXPECT_LE(last - first + 1, rf.frames);
  EXPECT_GE(last - first + 1, rf.frames - 2);  // output phase varies by one frame per side
}

TEST(ReceptiveField, CausalGeneratorHasNoLookahead) {
  GeneratorConfig cfg = GeneratorConfig::Toy();
  cfg.causal = true;
  EXPECT_EQ(receptive_field(cfg).future_frames, 0u);
  Generator g(cfg, 4);
  ConditioningTrack track = random_track(60, cfg.content_dim, 8);
  const auto z = z_of(cfg.z_dim, 9);
  const Waveform before = g.generate(track, z);
  for (std::size_t c = 0; c < track.frame_matrix.cols; ++c) track.frame_matrix.at(30, c) += 1.0;
  const Waveform after = g.generate(track, z);
  for (std::size_t i = 0; i < 30 * 96; ++i) ASSERT_EQ(before.samples[i], after.samples[i]) << i;
  EXPECT_NE(before.samples[30 * 96 + 95], after.samples[30 * 96 + 95]);
}

TEST(Discriminator, LayerListsFromConfigConstants) {
  const DiscriminatorConfig d;
  EXPECT_EQ(d.filters, (std::vector<int>{16, 64, 256, 1024, 1024, 1024, 1}));
  EXPECT_EQ(d.kernels, (std::vector<int>{15, 41, 41, 41, 41, 5, 3}));
  EXPECT_EQ(d.num_layers(), 7u);
  EXPECT_DOUBLE_EQ(d.leaky_slope, 0.2);
  EXPECT_TRUE(d.spectral_norm);
  EXPECT_NO_THROW(d.validate());
  const DiscriminatorConfig toy = DiscriminatorConfig::Toy();
  EXPECT_EQ(toy.kernels, d.kernels);
  EXPECT_EQ(toy.filters.back(), 1);
}

TEST(Discriminator, LengthsAndShapes) {
  const DiscriminatorConfig cfg = DiscriminatorConfig::Toy();
  const std::size_t min_len = cfg.min_input_length();
  EXPECT_EQ(cfg.output_length(min_len), 1u);
  EXPECT_EQ(cfg.output_length(min_len - 1), 0u);
  Discriminator d(cfg, 3);
  std::mt19937_64 gen(1);
  const ad::Tensor x = randn({2, 1, 8160}, gen);
  const ad::Tensor s = d.forward(x);
  EXPECT_EQ(s.shape(), (ad::Shape{2, 1, cfg.output_length(8160)}));
  EXPECT_THROW(d.forward(randn({1, 1, min_len - 1}, gen)), ArgumentError);
  DiscriminatorConfig bad = cfg;
  bad.filters.back() = 2;
  EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(Discriminator, ZeroLastLayerGivesZeroScores) {
  Discriminator d(DiscriminatorConfig::Toy(), 3);
  d.zero_last_layer();
  std::mt19937_64 gen(2);
  const ad::Tensor scores = d.forward(randn({1, 1, 6000}, gen));
  for (double v : scores.values()) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace regen

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


#include "regen/trainer.h"

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <ostream>

#include "regen/error.h"

namespace regen {
namespace {

constexpr char kStateFormat[] = "regen-train-state";

std::string mode_name(DiscriminatorMode m) {
  switch (m) {
    case DiscriminatorMode::kTrain: return "train";
    case DiscriminatorMode::kFrozen: return "frozen";
    case DiscriminatorMode::kNone: return "none";
  }
  return "train";
}

DiscriminatorMode parse_mode(const std::string& s) {
  if (s == "train") return DiscriminatorMode::kTrain;
  if (s == "frozen") return DiscriminatorMode::kFrozen;
  if (s == "none") return DiscriminatorMode::kNone;
  throw ArgumentError("unknown discriminator mode '" + s +
                      "' (expected train, frozen or none)");
}

std::uint64_t generator_seed(std::uint64_t seed) { return seed * 3 + 1; }
std::uint64_t discriminator_seed(std::uint64_t seed) { return seed * 3 + 2; }

// Rows [start, start + n) of a track.
ConditioningTrack crop_track(const ConditioningTrack& c, std::size_t start,
                             std::size_t n) {
  auto rows = [&](const Matrix& m) {
    if (m.empty()) return Matrix();
    Matrix out(n, m.cols);
    std::copy(m.data.begin() + start * m.cols,
              m.data.begin() + (start + n) * m.cols, out.data.begin());
    return out;
  };
  ConditioningTrack out;
  out.frame_matrix = rows(c.frame_matrix);
  out.frame_identity = rows(c.frame_identity);
  out.identity = c.identity;
  out.frame_rate_hz = c.frame_rate_hz;
  return out;
}

// [1, C, T] tensors -> [B, C, T].
ad::Tensor batch_of(const std::vector<ad::Tensor>& items) {
  std::vector<ad::Tensor> flat;
  for (const auto& t : items) flat.push_back(ad::reshape(t, {t.dim(1), t.dim(2)}));
  return ad::stack(flat);
}

ad::Tensor item_signal(const ad::Tensor& batch, std::size_t b) {
  return ad::reshape(ad::select(batch, b), {batch.dim(2)});
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what);
}

losses::LossReport train_step_impl(TrainState& s,
                                   const std::vector<TrainExample>& examples);

}  // namespace

void TrainConfig::validate() const {
  if (steps <= 0) throw ArgumentError("steps must be positive");
  if (batch <= 0) throw ArgumentError("batch must be positive");
  for (double lr : {lr_g, lr_d}) {
    if (!(lr >= 0.0 && lr < 0.1)) {
      throw ArgumentError("learning rates must lie in [0, 0.1)");
    }
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("betas must lie in [0, 1)");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw ArgumentError("lambda must be finite and nonnegative");
  }
  if (clip_samples < static_cast<std::size_t>(losses::kFftSizes[0])) {
    throw ArgumentError("clip_samples must be at least 2048");
  }
  if (clip_samples % kOutputHop != 0) {
    throw ArgumentError("clip_samples must be a whole number of 96-sample frames");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"steps", steps},   {"batch", batch},
          {"lr_g", lr_g},     {"lr_d", lr_d},
          {"betas", {beta1, beta2}}, {"seed", seed},
          {"lambda", lambda}, {"clip_samples", clip_samples},
          {"discriminator", mode_name(discriminator)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    c.lr_g = j.value("lr_g", c.lr_g);
    c.lr_d = j.value("lr_d", c.lr_d);
    if (j.contains("betas")) {
      const auto& b = j.at("betas");
      if (!b.is_array() || b.size() != 2) throw ParseError("betas must be a pair");
      c.beta1 = b[0].get<double>();
      c.beta2 = b[1].get<double>();
    }
    c.seed = j.value("seed", c.seed);
    c.lambda = j.value("lambda", c.lambda);
    c.clip_samples = j.value("clip_samples", c.clip_samples);
    c.discriminator = parse_mode(j.value("discriminator", std::string("train")));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainExample make_example(const Waveform& input, const Waveform& target,
                          FeatureEncoder& encoder, FeatureMode mode) {
  if (target.sample_rate_hz != kOutputRateHz) {
    throw ArgumentError("training targets must be 24 kHz");
  }
  TrainExample ex;
  ex.cond = encoder.encode(input, mode);
  const std::size_t n = ex.cond.frames() * (kOutputRateHz / kFrameRateHz);
  std::vector<double> y(n, 0.0);
  std::copy_n(target.samples.begin(), std::min(n, target.size()), y.begin());
  ex.target = Waveform(std::move(y), kOutputRateHz);
  return ex;
}

TrainState::TrainState(const GeneratorConfig& g, const DiscriminatorConfig& d,
                       const TrainConfig& t)
    : generator_config(g), discriminator_config(d), config(t), rng(t.seed + 7) {
  g.validate();
  d.validate();
  t.validate();
  const std::size_t per_frame = static_cast<std::size_t>(g.total_upsample());
  if (t.clip_samples % per_frame != 0) {
    throw ArgumentError("clip_samples must be a multiple of " +
                        std::to_string(per_frame));
  }
  if (t.discriminator != DiscriminatorMode::kNone &&
      t.clip_samples < d.min_input_length()) {
    throw ArgumentError("clip_samples is shorter than the discriminator's "
                        "minimum input of " + std::to_string(d.min_input_length()));
  }
  generator = std::make_unique<Generator>(g, generator_seed(t.seed));
  discriminator = std::make_unique<Discriminator>(d, discriminator_seed(t.seed));
  opt_g = std::make_unique<nn::Adam>(generator->state().params,
                                     nn::AdamConfig{t.lr_g, t.beta1, t.beta2});
  opt_d = std::make_unique<nn::Adam>(discriminator->state().params,
                                     nn::AdamConfig{t.lr_d, t.beta1, t.beta2});
}

nn::StateRegistry TrainState::registry() {
  nn::StateRegistry reg = generator->state();
  nn::StateRegistry d = discriminator->state();
  reg.params.insert(reg.params.end(), d.params.begin(), d.params.end());
  reg.buffers.insert(reg.buffers.end(), d.buffers.begin(), d.buffers.end());
  opt_g->collect("opt_g.", reg);
  opt_d->collect("opt_d.", reg);
  return reg;
}

losses::LossReport train_step(TrainState& s,
                              const std::vector<TrainExample>& examples) {
  try {
    return train_step_impl(s, examples);
  } catch (const NumericError& e) {
    throw NumericError("step " + std::to_string(s.step) + ": " + e.what());
  }
}

namespace {

losses::LossReport train_step_impl(TrainState& s,
                                   const std::vector<TrainExample>& examples) {
  if (examples.empty()) throw ArgumentError("training needs at least one example");
  const TrainConfig& cfg = s.config;
  const std::size_t per_frame = s.generator_config.total_upsample();
  const std::size_t crop_frames = cfg.clip_frames(static_cast<int>(per_frame));
  for (const auto& ex : examples) {
    if (ex.cond.frames() < crop_frames) {
      throw ArgumentError("training example has " + std::to_string(ex.cond.frames()) +
                          " frames, crops need " + std::to_string(crop_frames));
    }
    if (ex.target.size() != ex.cond.frames() * per_frame) {
      throw ArgumentError("training target is not aligned to its frames");
    }
  }
  const bool use_d = cfg.discriminator != DiscriminatorMode::kNone;

  s.generator->power_iterate();
  if (use_d) s.discriminator->power_iterate();

  std::vector<ad::Tensor> frames, zid1, zid2, targets;
  for (int b = 0; b < cfg.batch; ++b) {
    const auto& ex = examples[s.rng.uniform_int(examples.size())];
    const std::size_t start = s.rng.uniform_int(ex.cond.frames() - crop_frames + 1);
    const ConditioningTrack crop = crop_track(ex.cond, start, crop_frames);
    const auto z1 = s.rng.normal_vector(s.generator_config.z_dim);
    const auto z2 = s.rng.normal_vector(s.generator_config.z_dim);
    auto [f, a] = s.generator->make_inputs(crop, z1);
    frames.push_back(f);
    zid1.push_back(a);
    zid2.push_back(s.generator->make_inputs(crop, z2).second);
    std::vector<double> y(ex.target.samples.begin() + start * per_frame,
                          ex.target.samples.begin() + (start + crop_frames) * per_frame);
    const std::size_t len = y.size();
    targets.push_back(ad::Tensor::from({1, 1, len}, std::move(y)));
  }
  const ad::Tensor cond = batch_of(frames);
  const ad::Tensor real = batch_of(targets);
  const ad::Tensor x1 = s.generator->forward(cond, batch_of(zid1), true);
  const ad::Tensor x2 = s.generator->forward(cond, batch_of(zid2), true);

  losses::LossReport report;
  report.step = s.step;

  // Discriminator update against detached fakes.
  if (use_d) {
    const bool train_d = cfg.discriminator == DiscriminatorMode::kTrain;
    std::optional<ad::NoGradGuard> no_grad;
    if (!train_d) no_grad.emplace();
    s.opt_d->zero_grad();
    ad::Tensor l_d = losses::lsgan_discriminator_loss(
        s.discriminator->forward(real), s.discriminator->forward(x1.detach()));
    report.l_d = l_d.item();
    require_finite(report.l_d, "discriminator loss");
    if (train_d) {
      l_d.backward();
      s.opt_d->step();
    }
  }

  // Generator update.
  s.opt_g->zero_grad();
  const double inv_items = 1.0 / cfg.batch;
  ad::Tensor l_sed;
  ad::Tensor l_spec;
  for (int b = 0; b < cfg.batch; ++b) {
    const ad::Tensor y = item_signal(real, b);
    const ad::Tensor g1 = item_signal(x1, b);
    const ad::Tensor g2 = item_signal(x2, b);
    losses::SpecLossInfo i1, i2, i12;
    const ad::Tensor a1 = losses::spec_loss_multi(y, g1, &i1);
    const ad::Tensor a2 = losses::spec_loss_multi(y, g2, &i2);
    const ad::Tensor rep = losses::spec_loss_multi(g1, g2, &i12);
    const ad::Tensor sed = ad::sub(ad::add(a1, a2), rep);
    l_sed = l_sed.defined() ? ad::add(l_sed, sed) : sed;
    const ad::Tensor spec = ad::add(a1, a2);
    l_spec = l_spec.defined() ? ad::add(l_spec, spec) : spec;
    for (int m : losses::kFftSizes) {
      report.l_spec_per_scale[m] +=
          0.5 * inv_items * (i1.per_scale[m] + i2.per_scale[m]);
    }
    report.degenerate_target |= i1.degenerate_target;
  }
  l_sed = ad::scale(l_sed, inv_items);
  report.l_spec = 0.5 * inv_items * l_spec.item();
  report.l_sed = l_sed.item();
  ad::Tensor l_adv = ad::Tensor::scalar(0.0);
  if (use_d) {
    l_adv = ad::scale(ad::add(losses::lsgan_generator_loss(s.discriminator->forward(x1)),
                              losses::lsgan_generator_loss(s.discriminator->forward(x2))),
                      0.5);
  }
  report.l_adv = l_adv.item();
  ad::Tensor l_g = losses::generator_objective(l_sed, l_adv, cfg.lambda);
  report.l_g = l_g.item();
  for (double v : {report.l_spec, report.l_sed, report.l_adv, report.l_g}) {
    require_finite(v, "generator loss");
  }
  l_g.backward();
  s.opt_g->step();
  // Gradients that reached the discriminator through the generator loss are
  // discarded.
  s.opt_d->zero_grad();

  ++s.step;
  return report;
}

}  // namespace

std::vector<losses::LossReport> train(TrainState& state,
                                      const std::vector<TrainExample>& examples,
                                      std::int64_t steps, std::ostream* log) {
  std::vector<losses::LossReport> out;
  for (std::int64_t i = 0; i < steps; ++i) {
    out.push_back(train_step(state, examples));
    if (log) *log << out.back().to_jsonl() << std::flush;
  }
  return out;
}

Checkpoint to_checkpoint(TrainState& s) {
  Checkpoint ckpt;
  ckpt.metadata = {
      {"format", kStateFormat},
      {"generator", s.generator_config.to_json()},
      {"discriminator", s.discriminator_config.to_json()},
      {"train", s.config.to_json()},
      {"step", s.step},
      {"rng", s.rng.serialize()},
      {"adam_steps", {{"g", s.opt_g->steps()}, {"d", s.opt_d->steps()}}},
      {"seeds",
       {{"generator", generator_seed(s.config.seed)},
        {"discriminator", discriminator_seed(s.config.seed)}}}};
  export_state(s.registry(), ckpt);
  return ckpt;
}

std::unique_ptr<TrainState> from_checkpoint(const Checkpoint& ckpt) {
  const auto& m = ckpt.metadata;
  std::unique_ptr<TrainState> s;
  try {
    if (m.value("format", std::string()) != kStateFormat) {
      throw ParseError("checkpoint does not hold a training state");
    }
    s = std::make_unique<TrainState>(GeneratorConfig::from_json(m.at("generator")),
                                     DiscriminatorConfig::from_json(m.at("discriminator")),
                                     TrainConfig::from_json(m.at("train")));
    s->step = m.at("step").get<std::int64_t>();
    s->rng = Rng::deserialize(m.at("rng").get<std::string>());
    s->opt_g->set_steps(m.at("adam_steps").at("g").get<std::uint64_t>());
    s->opt_d->set_steps(m.at("adam_steps").at("d").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }
  nn::StateRegistry reg = s->registry();
  import_state(ckpt, reg);
  return s;
}

void save_checkpoint(TrainState& state, const std::filesystem::path& path) {
  write_checkpoint(to_checkpoint(state), path);
}

std::unique_ptr<TrainState> load_checkpoint(const std::filesystem::path& path) {
  return from_checkpoint(read_checkpoint(path));
}

std::unique_ptr<Generator> load_generator(const Checkpoint& ckpt) {
  GeneratorConfig cfg;
  try {
    cfg = GeneratorConfig::from_json(ckpt.metadata.at("generator"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint has no generator config: ") + e.what());
  }
  auto g = std::make_unique<Generator>(cfg, 0);
  nn::StateRegistry reg = g->state();
  import_state(ckpt, reg);
  return g;
}

std::pair<Waveform, Waveform> synthetic_clip(double seconds, std::uint64_t seed) {
  if (!(seconds > 0.0)) throw ArgumentError("clip duration must be positive");
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(std::lround(seconds * kOutputRateHz));
  std::array<double, 10> phase{};
  for (auto& p : phase) p = 2.0 * std::numbers::pi * rng.uniform();
  const double f0 = 140.0 + 80.0 * rng.uniform();
  std::vector<double> y(n);
  double theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kOutputRateHz;
    const double f = f0 * (1.0 + 0.05 * std::sin(2.0 * std::numbers::pi * 5.0 * t));
    theta += 2.0 * std::numbers::pi * f / kOutputRateHz;
    const double env = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * 3.0 * t);
    double v = 0.0;
    for (std::size_t k = 0; k < phase.size(); ++k) {
      v += std::sin((k + 1) * theta + phase[k]) / (k + 1);
    }
    // Breath noise keeps every STFT bin well above the log floor.
    y[i] = env * (0.2 * v + 0.02 * rng.normal());
  }
  Waveform target(std::move(y), kOutputRateHz);
  Waveform input = resample(target, kInputRateHz);
  return {std::move(input), std::move(target)};
}

}  // namespace regen

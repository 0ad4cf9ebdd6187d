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


#include "regen/cli.h"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "regen/audio_io.h"
#include "regen/checkpoint.h"
#include "regen/config.h"
#include "regen/error.h"
#include "regen/features.h"
#include "regen/generator.h"
#include "regen/grad_suite.h"
#include "regen/metrics.h"
#include "regen/random.h"
#include "regen/streaming.h"
#include "regen/trainer.h"

namespace regen {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
};

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg = c.config_path.empty() ? PipelineConfig()
                                             : PipelineConfig::load(c.config_path);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span<const unsigned char>(
                              reinterpret_cast<const unsigned char*>(text.data()),
                              text.size()));
}

Waveform read_input(const fs::path& path) {
  Waveform w = read_wav(path);
  return w.sample_rate_hz == kInputRateHz ? w : resample(w, kInputRateHz);
}

std::unique_ptr<Generator> make_generator(const PipelineConfig& cfg,
                                          const std::string& checkpoint,
                                          std::ostream& err) {
  if (!checkpoint.empty()) return load_generator(read_checkpoint(checkpoint));
  err << "warning: no checkpoint given; using an untrained generator\n";
  return std::make_unique<Generator>(cfg.generator, cfg.seed);
}

FeatureMode mode_for(const Generator& g) {
  return g.config().causal ? FeatureMode::kCausal : FeatureMode::kOffline;
}

std::vector<std::pair<std::string, Waveform>> read_wav_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, Waveform>> out;
  for (const auto& f : files) out.emplace_back(f.filename().string(), read_wav(f));
  return out;
}

// ---- Subcommands ---------------------------------------------------------------------

struct RegenerateArgs {
  std::string in, out, checkpoint, report;
  bool stream = false;
  std::optional<double> chunk_ms;
};

int cmd_regenerate(const Common& common, const RegenerateArgs& a, std::ostream& out,
                   std::ostream& err) {
  PipelineConfig cfg = load_config(common);
  if (a.chunk_ms) cfg.streaming.chunk_ms = *a.chunk_ms;
  cfg.validate();
  const Waveform input = read_input(a.in);
  auto gen = make_generator(cfg, a.checkpoint, err);
  FeatureEncoder encoder(cfg.encoder);
  Rng rng(cfg.seed);
  const std::vector<double> z = rng.normal_vector(gen->config().z_dim);
  Waveform y;
  nlohmann::json summary;
  if (a.stream) {
    if (cfg.streaming.threaded) {
      y = run_threaded(make_stream_parts(encoder, *gen, z), input, cfg.streaming.chunk_ms,
                       cfg.streaming.queue_capacity);
    } else {
      StreamingPipeline pipeline(make_stream_parts(encoder, *gen, z), cfg.streaming.chunk_ms);
      y = pipeline.run(input);
      const LatencyBudget budget = pipeline.budget();
      summary["latency"] = budget.to_json();
      if (!a.report.empty()) write_text(a.report, budget.to_json().dump(2) + "\n");
    }
  } else {
    y = gen->generate(encoder.encode(input, mode_for(*gen)), z);
  }
  if (a.stream && cfg.streaming.threaded && !a.report.empty()) {
    err << "warning: --report needs the serial stream; no report written\n";
  }
  // Trim the frame padding so the output spans the input duration.
  const auto expected = static_cast<std::size_t>(
      std::lround(input.duration_s() * kOutputRateHz));
  if (y.size() > expected) y.samples.resize(expected);
  write_wav(y, a.out);
  summary["out"] = a.out;
  summary["seconds"] = y.duration_s();
  summary["sample_rate_hz"] = y.sample_rate_hz;
  out << summary.dump() << "\n";
  return 0;
}

int cmd_features(const Common& common, const std::string& in, const std::string& out_path,
                 const std::string& mode, std::ostream& out) {
  const PipelineConfig cfg = load_config(common);
  if (mode != "offline" && mode != "causal") {
    throw ArgumentError("--mode must be offline or causal");
  }
  FeatureEncoder encoder(cfg.encoder);
  const ConditioningTrack track = encoder.encode(
      read_input(in), mode == "causal" ? FeatureMode::kCausal : FeatureMode::kOffline);
  write_feature_dump(track, out_path);
  out << nlohmann::json{{"out", out_path},
                        {"frames", track.frames()},
                        {"columns", track.frame_matrix.cols},
                        {"frame_rate_hz", track.frame_rate_hz}}
             .dump()
      << "\n";
  return 0;
}

struct TrainArgs {
  std::optional<std::int64_t> steps;
  std::optional<int> batch;
  std::optional<double> lr_g, lr_d, lambda;
  std::string discriminator;
  std::string input, target, checkpoint_out, log, resume;
};

int cmd_train(const Common& common, const TrainArgs& a, std::ostream& out) {
  PipelineConfig cfg = load_config(common);
  if (a.steps) cfg.train.steps = *a.steps;
  if (a.batch) cfg.train.batch = *a.batch;
  if (a.lr_g) cfg.train.lr_g = *a.lr_g;
  if (a.lr_d) cfg.train.lr_d = *a.lr_d;
  if (a.lambda) cfg.train.lambda = *a.lambda;
  if (!a.discriminator.empty()) {
    cfg.train.discriminator =
        TrainConfig::from_json({{"discriminator", a.discriminator}}).discriminator;
  }
  cfg.validate();

  std::unique_ptr<TrainState> state;
  if (!a.resume.empty()) {
    state = load_checkpoint(a.resume);
    state->config.steps = cfg.train.steps;
  } else {
    state = std::make_unique<TrainState>(cfg.generator, cfg.discriminator, cfg.train);
  }
  Waveform input, target;
  if (a.input.empty()) {
    std::tie(input, target) = synthetic_clip(1.0, cfg.seed);
  } else {
    input = read_input(a.input);
    target = a.target.empty() ? read_wav(a.input) : read_wav(a.target);
    if (target.sample_rate_hz != kOutputRateHz) target = resample(target, kOutputRateHz);
  }
  FeatureEncoder encoder(cfg.encoder);
  const std::vector<TrainExample> examples{make_example(
      input, target, encoder, mode_for(*state->generator))};

  std::ostringstream log;
  std::vector<losses::LossReport> reports;
  try {
    reports = train(*state, examples, cfg.train.steps, &log);
  } catch (...) {
    if (!a.log.empty()) write_text(a.log, log.str());
    throw;
  }
  if (!a.log.empty()) write_text(a.log, log.str());
  if (!a.checkpoint_out.empty()) save_checkpoint(*state, a.checkpoint_out);
  nlohmann::json summary = {{"steps", reports.size()}, {"final_step", state->step}};
  if (!reports.empty()) {
    summary["first_l_spec"] = reports.front().l_spec;
    summary["last_l_spec"] = reports.back().l_spec;
  }
  out << summary.dump() << "\n";
  return 0;
}

int cmd_bench(const Common& common, double seconds, int runs,
              std::optional<double> chunk_ms, const std::string& checkpoint,
              const std::string& report, std::ostream& out, std::ostream& err) {
  PipelineConfig cfg = load_config(common);
  if (chunk_ms) cfg.streaming.chunk_ms = *chunk_ms;
  cfg.validate();
  auto gen = make_generator(cfg, checkpoint, err);
  FeatureEncoder encoder(cfg.encoder);
  const Waveform input = synthetic_clip(seconds, cfg.seed).first;
  Rng rng(cfg.seed);
  StreamingPipeline pipeline(
      make_stream_parts(encoder, *gen, rng.normal_vector(gen->config().z_dim)),
      cfg.streaming.chunk_ms);
  const RtfReport rtf = measure_rtf(pipeline, input, runs);
  nlohmann::json j = rtf.to_json();
  j["latency"] = pipeline.budget().to_json();
  if (!report.empty()) write_text(report, j.dump(2) + "\n");
  out << j.dump() << "\n";
  return 0;
}

int cmd_grad_check(std::uint64_t seed, int trials, std::ostream& out) {
  if (trials < 1) throw ArgumentError("--trials must be positive");
  const GradSuiteResult r = run_gradient_suite(seed, trials);
  for (const auto& c : r.cases) {
    out << c.name << " " << c.max_rel_error << " (" << c.checked << " checked, "
        << c.skipped << " unresolved)\n";
  }
  const double worst = r.max_rel_error();
  out << "max relative error: " << worst << "\n";
  return worst < 1e-4 ? 0 : 2;
}

int cmd_fdsd(const std::string& generated, const std::string& reference, bool paired,
             std::ostream& out, std::ostream& err) {
  const auto g = read_wav_dir(generated);
  const auto r = read_wav_dir(reference);
  if (paired) {
    if (g.size() != r.size()) throw ArgumentError("paired sets differ in size");
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (g[i].first != r[i].first) {
        throw ArgumentError("no reference named " + g[i].first + " for pairing");
      }
    }
  }
  std::vector<Waveform> gw, rw;
  for (const auto& [name, w] : g) gw.push_back(w);
  for (const auto& [name, w] : r) rw.push_back(w);
  const FdsdResult res = fdsd_between(gw, rw, paired);
  if (res.n < res.d + 1) {
    err << "warning: " << res.n << " embeddings for dimension " << res.d
        << "; covariance estimates are rank-deficient\n";
  }
  out << res.to_json().dump() << "\n";
  return 0;
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  const Checkpoint ckpt = read_checkpoint(path);
  out << "format: " << ckpt.metadata.value("format", std::string("?")) << "\n";
  if (ckpt.metadata.contains("step")) out << "step: " << ckpt.metadata.at("step") << "\n";
  std::size_t total = 0;
  for (const auto& t : ckpt.tensors) {
    out << t.name << " " << ad::shape_str(t.shape) << "\n";
    total += t.data.size();
  }
  out << "tensors: " << ckpt.tensors.size() << ", values: " << total << "\n";
  bool consistent = true;
  auto check = [&](const std::string& label, nn::StateRegistry reg, std::size_t expected) {
    std::size_t found = 0;
    for (const auto& p : reg.params) {
      if (const auto* t = ckpt.find(p.name)) found += t->data.size();
    }
    out << label << " parameters: " << found << " (configuration expects " << expected
        << ")\n";
    consistent = consistent && found == expected;
  };
  if (ckpt.metadata.contains("generator")) {
    const auto cfg = GeneratorConfig::from_json(ckpt.metadata.at("generator"));
    Generator g(cfg, 0);
    check("generator", g.state(), count_parameters(cfg));
  }
  if (ckpt.metadata.contains("discriminator")) {
    const auto cfg = DiscriminatorConfig::from_json(ckpt.metadata.at("discriminator"));
    Discriminator d(cfg, 0);
    check("discriminator", d.state(), d.num_parameters());
  }
  return consistent ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Speech regeneration toolkit", "regen"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t seed_value = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "JSON pipeline configuration")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed_value, "Seed for every random draw");
  };

  RegenerateArgs regen_args;
  auto* regen = app.add_subcommand("regenerate", "Resynthesize a recording");
  add_common(regen);
  regen->add_option("--in", regen_args.in, "Input WAV")->required()->check(CLI::ExistingFile);
  regen->add_option("--out", regen_args.out, "Output WAV (24 kHz)")->required();
  regen->add_option("--checkpoint", regen_args.checkpoint, "RGNC checkpoint");
  regen->add_flag("--stream", regen_args.stream, "Chunked causal processing");
  regen->add_option("--chunk-ms", regen_args.chunk_ms, "Chunk length in ms");
  regen->add_option("--report", regen_args.report, "Latency report JSON (with --stream)");

  std::string feat_in, feat_out, feat_mode = "offline";
  auto* feat = app.add_subcommand("features", "Extract conditioning features");
  add_common(feat);
  feat->add_option("--in", feat_in, "Input WAV")->required()->check(CLI::ExistingFile);
  feat->add_option("--out", feat_out, "Feature dump (RGNF)")->required();
  feat->add_option("--mode", feat_mode, "offline or causal");

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train-toy", "Desk-scale adversarial training");
  add_common(tr);
  tr->add_option("--steps", train_args.steps, "Training steps");
  tr->add_option("--batch", train_args.batch, "Crops per step");
  tr->add_option("--lr-g", train_args.lr_g, "Generator learning rate");
  tr->add_option("--lr-d", train_args.lr_d, "Discriminator learning rate");
  tr->add_option("--lambda", train_args.lambda, "Adversarial weight");
  tr->add_option("--discriminator", train_args.discriminator, "train, frozen or none");
  tr->add_option("--input", train_args.input, "Input WAV (default: synthetic clip)")
      ->check(CLI::ExistingFile);
  tr->add_option("--target", train_args.target, "Aligned target WAV")
      ->check(CLI::ExistingFile);
  tr->add_option("--checkpoint-out", train_args.checkpoint_out, "Write the final state");
  tr->add_option("--log", train_args.log, "JSON-lines loss log");
  tr->add_option("--resume", train_args.resume, "Resume from a checkpoint")
      ->check(CLI::ExistingFile);

  double bench_seconds = 10.0;
  int bench_runs = 5;
  std::optional<double> bench_chunk;
  std::string bench_ckpt, bench_report;
  auto* bench = app.add_subcommand("bench", "Measure the streaming real-time factor");
  add_common(bench);
  bench->add_option("--seconds", bench_seconds, "Audio length (>= 5)");
  bench->add_option("--runs", bench_runs, "Timed runs (>= 5)");
  bench->add_option("--chunk-ms", bench_chunk, "Chunk length in ms");
  bench->add_option("--checkpoint", bench_ckpt, "RGNC checkpoint");
  bench->add_option("--report", bench_report, "Write the result JSON here");

  std::uint64_t gc_seed = 0;
  int gc_trials = 1;
  auto* gc = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  gc->add_option("--seed", gc_seed, "Seed");
  gc->add_option("--trials", gc_trials, "Trials per case");

  std::string fd_gen, fd_ref;
  bool fd_paired = false;
  auto* fd = app.add_subcommand("fdsd", "Frechet distance between two WAV sets");
  fd->add_option("--generated", fd_gen, "Directory of generated WAVs")->required();
  fd->add_option("--reference", fd_ref, "Directory of reference WAVs")->required();
  fd->add_flag("--paired", fd_paired, "Also compute the matched-pair distance");

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-checkpoint", "List checkpoint tensors");
  inspect->add_option("path", inspect_path, "RGNC checkpoint")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return 1;
  }
  for (const auto* s : {regen, feat, tr, bench}) {
    if (s->parsed() && s->count("--seed")) common.seed = seed_value;
  }

  try {
    if (regen->parsed()) return cmd_regenerate(common, regen_args, out, err);
    if (feat->parsed()) return cmd_features(common, feat_in, feat_out, feat_mode, out);
    if (tr->parsed()) return cmd_train(common, train_args, out);
    if (bench->parsed()) {
      return cmd_bench(common, bench_seconds, bench_runs, bench_chunk, bench_ckpt,
                       bench_report, out, err);
    }
    if (gc->parsed()) return cmd_grad_check(gc_seed, gc_trials, out);
    if (fd->parsed()) return cmd_fdsd(fd_gen, fd_ref, fd_paired, out, err);
    if (inspect->parsed()) return cmd_inspect(inspect_path, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace regen

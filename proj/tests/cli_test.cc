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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "oracles.h"
#include "regen/audio_io.h"
#include "regen/cli.h"
#include "regen/config.h"
#include "regen/features.h"
#include "regen/generator.h"
#include "json.hpp"

namespace regen {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "regen");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Shared fixture: one tiny checkpoint and one input clip for the suite.
class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "regen_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    Waveform in = oracle::sweep(120.0, 300.0, 0.61);
    for (double& v : in.samples) v *= 0.6;
    write_wav(in, dir_ / "in.wav");
    const Result r = run({"train-toy", "--steps", "2", "--seed", "3", "--checkpoint-out",
                          (dir_ / "c.rgnc").string(), "--log", (dir_ / "log.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static fs::path path(const std::string& name) { return dir_ / name; }
  static inline fs::path dir_;
};

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  const Result bad_flag = run({"regenerate", "--in", path("in.wav").string(), "--out", "x.wav",
                               "--bogus"});
  EXPECT_EQ(bad_flag.code, 1);
  EXPECT_NE(bad_flag.err.find("--chunk-ms"), std::string::npos);  // help text
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"no-such-command"}).code, 1);
  EXPECT_EQ(run({"features", "--in", path("missing.wav").string(), "--out", "f"}).code, 1);
  EXPECT_EQ(run({"regenerate", "--in", path("in.wav").string(), "--out",
                 path("o.wav").string(), "--chunk-ms", "0"})
                .code,
            1);
}

TEST_F(Cli, ProcessingErrorsExitTwo) {
  std::ofstream(path("junk.rgnc")) << "not a checkpoint";
  EXPECT_EQ(run({"inspect-checkpoint", path("junk.rgnc").string()}).code, 2);
  EXPECT_EQ(run({"regenerate", "--in", path("in.wav").string(), "--out",
                 path("o.wav").string(), "--checkpoint", path("junk.rgnc").string()})
                .code,
            2);
  nlohmann::json cfg = PipelineConfig{}.to_json();
  cfg["config_version"] = 2;
  std::ofstream(path("v2.json")) << cfg.dump();
  EXPECT_EQ(run({"features", "--in", path("in.wav").string(), "--out", path("f.rgnf").string(),
                 "--config", path("v2.json").string()})
                .code,
            2);
}

TEST_F(Cli, RegenerateKeepsDurationAndIsByteIdentical) {
  for (const bool stream : {false, true}) {
    std::vector<std::string> args = {"regenerate", "--in", path("in.wav").string(),
                                     "--checkpoint", path("c.rgnc").string(), "--seed", "5"};
    if (stream) args.push_back("--stream");
    auto with_out = [&](const std::string& name) {
      auto a = args;
      a.insert(a.end(), {"--out", path(name).string()});
      return run(a);
    };
    const Result a = with_out("a.wav");
    ASSERT_EQ(a.code, 0) << a.err;
    ASSERT_EQ(with_out("b.wav").code, 0);
    EXPECT_EQ(bytes_of(path("a.wav")), bytes_of(path("b.wav"))) << stream;
    const Waveform in = read_wav(path("in.wav"));
    const Waveform y = read_wav(path("a.wav"));
    EXPECT_EQ(y.sample_rate_hz, kOutputRateHz);
    EXPECT_NEAR(y.duration_s(), in.duration_s(), 1.0 / kFrameRateHz) << stream;
    EXPECT_NO_THROW((void)nlohmann::json::parse(a.out));
  }
}

TEST_F(Cli, ThreadCountDoesNotChangeOutput) {
  const std::vector<std::string> base = {"regenerate", "--in", path("in.wav").string(),
                                         "--checkpoint", path("c.rgnc").string(), "--out"};
  ::setenv("REGEN_NUM_THREADS", "1", 1);
  auto a = base;
  a.push_back(path("t1.wav").string());
  ASSERT_EQ(run(a).code, 0);
  ::setenv("REGEN_NUM_THREADS", "3", 1);
  auto b = base;
  b.push_back(path("t3.wav").string());
  ASSERT_EQ(run(b).code, 0);
  ::unsetenv("REGEN_NUM_THREADS");
  EXPECT_EQ(bytes_of(path("t1.wav")), bytes_of(path("t3.wav")));
}

TEST_F(Cli, TrainToyIsDeterministic) {
  const Result r = run({"train-toy", "--steps", "2", "--seed", "3", "--checkpoint-out",
                        path("c2.rgnc").string(), "--log", path("log2.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(bytes_of(path("c.rgnc")), bytes_of(path("c2.rgnc")));
  EXPECT_EQ(bytes_of(path("log.jsonl")), bytes_of(path("log2.jsonl")));
  std::istringstream log(bytes_of(path("log.jsonl")));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    EXPECT_TRUE(nlohmann::json::parse(line).contains("l_spec"));
    ++lines;
  }
  EXPECT_EQ(lines, 2);
}

TEST_F(Cli, InspectListsTensorsMatchingParameterCount) {
  const Result r = run({"inspect-checkpoint", path("c.rgnc").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::size_t expected = count_parameters(PipelineConfig{}.generator);
  EXPECT_NE(r.out.find("generator parameters: " + std::to_string(expected) +
                       " (configuration expects " + std::to_string(expected) + ")"),
            std::string::npos)
      << r.out;
  EXPECT_NE(r.out.find("step: 2"), std::string::npos);
}

TEST_F(Cli, FeaturesWritesAReadableDump) {
  for (const std::string mode : {"offline", "causal"}) {
    const Result r = run({"features", "--in", path("in.wav").string(), "--out",
                          path("f.rgnf").string(), "--mode", mode});
    ASSERT_EQ(r.code, 0) << r.err;
    const ConditioningTrack c = read_feature_dump(path("f.rgnf"));
    EXPECT_EQ(c.frames(), 153u);  // ceil(9760 / 64)
    EXPECT_EQ(c.frame_matrix.cols, 43u);
  }
  EXPECT_EQ(run({"features", "--in", path("in.wav").string(), "--out", path("f.rgnf").string(),
                 "--mode", "sideways"})
                .code,
            1);
}

TEST_F(Cli, ConfigFileAndFlagsCombine) {
  PipelineConfig cfg;
  cfg.streaming.chunk_ms = 40.0;
  const nlohmann::json j = cfg.to_json();
  EXPECT_EQ(j.at("config_version"), 1);
  std::ofstream(path("cfg.json")) << j.dump(2);
  const std::vector<std::string> base = {"regenerate", "--in", path("in.wav").string(),
                                         "--checkpoint", path("c.rgnc").string(), "--stream",
                                         "--config", path("cfg.json").string()};
  auto a = base;
  a.insert(a.end(), {"--out", path("c40.wav").string()});
  ASSERT_EQ(run(a).code, 0);
  auto b = base;
  b.insert(b.end(), {"--chunk-ms", "10", "--out", path("c10.wav").string()});
  const Result r = run(b);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out).at("latency").at("chunk_ms"), 10.0);
  const Waveform y40 = read_wav(path("c40.wav")), y10 = read_wav(path("c10.wav"));
  ASSERT_EQ(y40.size(), y10.size());
  for (std::size_t i = 0; i < y40.size(); ++i) ASSERT_NEAR(y40.samples[i], y10.samples[i], 1e-5);
}

TEST_F(Cli, FdsdPrintsJson) {
  fs::create_directories(path("gen"));
  fs::create_directories(path("ref"));
  for (int i = 0; i < 3; ++i) {
    const std::string name = "u" + std::to_string(i) + ".wav";
    write_wav(oracle::sine(200.0 + 40 * i, 0.3), path("gen") / name);
    write_wav(oracle::sine(210.0 + 40 * i, 0.3), path("ref") / name);
  }
  const Result r = run({"fdsd", "--generated", path("gen").string(), "--reference",
                        path("ref").string(), "--paired"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  for (const char* k : {"fdsd", "cfdsd", "n", "d"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j.at("n"), 3);
  EXPECT_EQ(j.at("d"), 40);
  EXPECT_NE(r.err.find("warning"), std::string::npos);  // 3 < 41
}

TEST_F(Cli, GradCheckSeedSeven) {
  const Result r = run({"grad-check", "--seed", "7"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const auto pos = r.out.find("max relative error: ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_LT(std::stod(r.out.substr(pos + 20)), 1e-4);
}

}  // namespace
}  // namespace regen

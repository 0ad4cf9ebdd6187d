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


// Chunked causal inference: pre-enhancement, the four causal feature stages
// and a causal generator, fed 16 kHz chunks and emitting 24 kHz audio.
//
// Output frame t (96 samples) is emitted no later than when input sample
// 64 t + 63 + H arrives, where H is the declared horizon: the furthest input
// any frame depends on through the pre-enhancer and the largest stage
// lookahead, worst case over frame phases. The generator adds none.

#ifndef REGEN_STREAMING_H_
#define REGEN_STREAMING_H_

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "regen/audio_io.h"
#include "regen/features.h"
#include "regen/generator.h"

namespace regen {

struct StageLatency {
  std::string name;
  double receptive_field_ms = 0.0;
  double future_context_ms = 0.0;
  double compute_ms = 0.0;  // mean wall time per processed chunk
};

struct LatencyBudget {
  std::vector<StageLatency> stages;  // pre-enhancer, feature stages, generator
  double chunk_ms = 0.0;
  std::size_t declared_horizon_samples = 0;
  // Longest path of future context and compute plus one chunk.
  double total_latency_ms = 0.0;

  nlohmann::json to_json() const;
};

// Everything a stream needs. The generator is borrowed and must be causal.
struct StreamParts {
  std::unique_ptr<PreEnhancer> pre;
  // Column order: content, pitch, loudness, identity.
  std::vector<std::unique_ptr<FrameStage>> stages;
  Generator* generator = nullptr;
  std::vector<double> z;
};

// Parts for an encoder configuration and a generator.
StreamParts make_stream_parts(const FeatureEncoder& encoder, Generator& generator,
                              std::vector<double> z);

class StreamingPipeline {
 public:
  // Throws ModeError for a non-causal generator and ShapeError when the stage
  // widths do not match the generator.
  StreamingPipeline(StreamParts parts, double chunk_ms = 20.0);

  // Any chunk length is accepted; frames are emitted once their inputs and
  // the declared lookahead have arrived. An empty chunk returns nothing and
  // leaves the state untouched.
  std::vector<double> process_chunk(std::span<const double> chunk);
  // Flushes the remaining frames (input treated as zero past its end).
  std::vector<double> finish();
  void reset();

  // Whole signal in chunks of `chunk_ms`, then finish.
  Waveform run(const Waveform& input);

  std::size_t declared_horizon_samples() const;
  std::size_t input_received() const { return received_; }
  std::size_t frames_emitted() const { return frames_emitted_; }
  LatencyBudget budget() const;
  double chunk_ms() const { return chunk_ms_; }
  std::size_t chunk_samples() const;

 private:
  friend class ThreadedStream;
  std::vector<double> feed_stages(std::span<const double> enhanced, bool final);
  std::vector<double> drain(bool final);

  StreamParts parts_;
  double chunk_ms_;
  std::vector<StageRunner> runners_;
  std::vector<Matrix> pending_;  // completed rows not yet consumed, per stage
  std::unique_ptr<GeneratorStream> gen_stream_;
  std::size_t received_ = 0;
  std::size_t frames_emitted_ = 0;
  std::size_t chunks_ = 0;
  std::vector<std::chrono::nanoseconds> compute_;  // pre, stages..., generator
};

// Same result as StreamingPipeline::run with every stage on its own worker
// thread, linked by bounded queues of `queue_capacity` chunks.
Waveform run_threaded(StreamParts parts, const Waveform& input, double chunk_ms,
                      std::size_t queue_capacity = 4);

// Offline reference: the causal encoder and generator over the whole signal.
Waveform offline_causal(StreamParts& parts, const Waveform& input);

struct ProbeResult {
  bool passed = true;
  std::string offending_stage;  // empty when passed
  std::string detail;
};

// Perturbs the input beyond the frame holding sample `t` plus each
// component's declared lookahead and checks that everything that frame
// depends on is bit-unchanged. Throws ModeError for a non-causal generator.
ProbeResult causality_probe(StreamParts& parts, const Waveform& input,
                            std::size_t t, std::uint64_t seed = 0);

// Largest observed lookahead in samples: over `count` consecutive
// perturbation positions p from `position`, max of p - (64 f + 63) where f is
// the first output frame that changes. 256 positions cover every phase of the
// frame grid and the gate hop.
std::int64_t measure_horizon(StreamParts& parts, const Waveform& input,
                            std::size_t position, std::size_t count = 256);

struct RtfReport {
  double median = 0.0;
  std::vector<double> runs;
  double audio_seconds = 0.0;
  nlohmann::json to_json() const;
};

// Wall time of `process` over the audio duration: one warmup, then the median
// of `runs` timed calls. Throws ArgumentError for inputs under 5 s or fewer
// than 5 runs.
RtfReport measure_rtf(const Waveform& input, const std::function<void()>& process,
                      int runs = 5);
// RTF of the streaming pipeline on `input`.
RtfReport measure_rtf(StreamingPipeline& pipeline, const Waveform& input,
                      int runs = 5);

}  // namespace regen

#endif  // REGEN_STREAMING_H_

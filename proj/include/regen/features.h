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

// Conditioning features on the 250 Hz frame grid.
//
// Frame t owns input samples [64 t, 64 t + 64). Every frame-local analysis is
// a FrameStage that sees a fixed window around its frame: `past` samples
// before the frame start and `future` samples after the frame end. Samples
// outside the signal read as zero. Offline causal extraction and streaming
// drive the same FrameStage objects through a StageRunner, so both produce
// identical rows.

#ifndef REGEN_FEATURES_H_
#define REGEN_FEATURES_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "regen/audio_io.h"
#include "regen/matrix.h"

namespace regen {

inline constexpr int kIdentityDim = 256;
inline constexpr int kMelBands = 40;
inline constexpr double kMinF0Hz = 50.0;
inline constexpr double kMaxF0Hz = 600.0;
inline constexpr double kLoudnessFloorDb = -80.0;
inline constexpr double kLoudnessCeilDb = 20.0;

enum class FeatureMode { kOffline, kCausal };

struct PitchTrack {
  std::vector<double> f0_hz;  // 0 on unvoiced frames
  std::vector<int> voicing;
  int frame_rate_hz = kFrameRateHz;

  std::size_t size() const { return f0_hz.size(); }
};

struct LoudnessTrack {
  std::vector<double> dba;
  int frame_rate_hz = kFrameRateHz;

  std::size_t size() const { return dba.size(); }
};

struct IdentityVector {
  std::vector<double> values;  // unit L2 norm
};

struct ContentTrack {
  Matrix values;  // [frames x content_dim]
  int frame_rate_hz = kFrameRateHz;
};

struct ConditioningTrack {
  // [frames x (content_dim + 3)]: content | log2(f0 / 50) | voicing | loudness
  Matrix frame_matrix;
  IdentityVector identity;
  // Causal mode only: [frames x kIdentityDim], the running identity estimate
  // at every frame. Empty offline.
  Matrix frame_identity;
  int frame_rate_hz = kFrameRateHz;

  std::size_t frames() const { return frame_matrix.rows; }
  std::size_t content_dim() const {
    return frame_matrix.cols >= 3 ? frame_matrix.cols - 3 : 0;
  }
};

// ---- Frame stages ---------------------------------------------------------------

class FrameStage {
 public:
  virtual ~FrameStage() = default;

  virtual std::string name() const = 0;
  virtual std::size_t width() const = 0;
  // Window geometry: the samples this stage is handed for each frame.
  virtual std::size_t past_samples() const = 0;
  virtual std::size_t future_samples() const = 0;
  // Lookahead the stage claims in the latency budget. Equal to
  // future_samples() for well-behaved stages.
  virtual std::size_t declared_future_samples() const {
    return future_samples();
  }
  virtual void reset() = 0;
  // `window` holds past + 64 + future samples. Frames arrive in order.
  virtual void compute_frame(std::span<const double> window,
                             std::span<double> out) = 0;

  std::size_t window_samples() const {
    return past_samples() + kInputHop + future_samples();
  }
};

// Feeds samples to one FrameStage and emits rows once their window is
// complete.
class StageRunner {
 public:
  explicit StageRunner(FrameStage* stage);

  // Appends input and returns the newly completed rows.
  Matrix push(std::span<const double> samples);
  // Treats the input as ended (zeros beyond) and emits the remaining rows up
  // to ceil(total / 64) frames.
  Matrix finish();
  void reset();

  std::size_t frames_emitted() const { return next_frame_; }
  FrameStage* stage() const { return stage_; }

 private:
  Matrix emit(std::size_t limit);

  FrameStage* stage_;
  std::vector<double> buffer_;  // input samples from buffer_start_
  std::int64_t buffer_start_ = 0;
  std::size_t received_ = 0;
  std::size_t next_frame_ = 0;
};

// Runs a stage over a whole signal through a fresh StageRunner.
Matrix run_stage(FrameStage& stage, std::span<const double> samples);

// ---- Pre-enhancement ---------------------------------------------------------------

// Sample-to-sample enhancer with bounded lookahead.
class PreEnhancer {
 public:
  virtual ~PreEnhancer() = default;
  virtual std::string name() const = 0;
  virtual std::size_t future_samples() const = 0;
  // Span of input samples one output sample can depend on.
  virtual std::size_t receptive_field_samples() const {
    return future_samples() + 1;
  }
  // Last input index that output sample j can depend on.
  virtual std::int64_t input_reach(std::int64_t j) const {
    return j + static_cast<std::int64_t>(future_samples());
  }
  virtual void reset() = 0;
  // Streaming: returns the output samples that became final.
  virtual std::vector<double> push(std::span<const double> samples) = 0;
  // Returns the remaining output so the total equals the total input.
  virtual std::vector<double> finish() = 0;

  // Whole-signal processing through reset/push/finish.
  Waveform process(const Waveform& x);
};

class PassthroughEnhancer : public PreEnhancer {
 public:
  std::string name() const override { return "passthrough"; }
  std::size_t future_samples() const override { return 0; }
  void reset() override {}
  std::vector<double> push(std::span<const double> samples) override;
  std::vector<double> finish() override { return {}; }
};

// Short-time spectral gate: sqrt-Hann analysis/synthesis (512, hop 256) that
// zeroes every bin whose magnitude is below `threshold`. The first tap of
// the sqrt-Hann window is zero, so frame s reads input s+1 .. s+511 and writes
// output s+1 .. s+511.
class SpectralGateEnhancer : public PreEnhancer {
 public:
  static constexpr std::size_t kFrame = 512;
  static constexpr std::size_t kHop = 256;

  explicit SpectralGateEnhancer(double threshold = 0.05);

  std::string name() const override { return "spectral_gate"; }
  std::size_t future_samples() const override { return kFrame - 2; }
  // Two overlapping frames cover every output sample.
  std::size_t receptive_field_samples() const override { return kFrame + kHop - 1; }
  // Output j waits for the latest frame starting before it.
  std::int64_t input_reach(std::int64_t j) const override;
  void reset() override;
  std::vector<double> push(std::span<const double> samples) override;
  std::vector<double> finish() override;

  double threshold() const { return threshold_; }

 private:
  void process_frame(std::int64_t start);
  std::vector<double> take_ready(std::size_t limit);

  double threshold_;
  std::vector<double> window_;
  std::vector<double> input_;     // samples from input_start_
  std::int64_t input_start_ = 0;
  std::size_t received_ = 0;
  std::vector<double> accum_;     // overlap-add buffer from emitted_
  std::size_t emitted_ = 0;
  std::int64_t next_frame_start_ = -static_cast<std::int64_t>(kHop);
};

std::unique_ptr<PreEnhancer> make_pre_enhancer(const std::string& name,
                                               double gate_threshold = 0.05);

// ---- Stages -----------------------------------------------------------------------

// A-weighted level of a 512-sample Hann frame ending at the frame end.
class LoudnessStage : public FrameStage {
 public:
  LoudnessStage();
  std::string name() const override { return "loudness"; }
  std::size_t width() const override { return 1; }
  std::size_t past_samples() const override { return 448; }
  std::size_t future_samples() const override { return 0; }
  void reset() override {}
  void compute_frame(std::span<const double> window,
                     std::span<double> out) override;

 private:
  std::vector<double> hann_;
  std::vector<double> weight2_;  // squared A-weight gain per bin
};

// 40-band log-mel energies of the 512-sample Hann frame
// [64 t - 128, 64 t + 384).
std::vector<double> content_log_mel(std::span<const double> window);

// Log-mel content with running scalar normalization (causal mode).
class ContentStage : public FrameStage {
 public:
  std::string name() const override { return "content"; }
  std::size_t width() const override { return kMelBands; }
  std::size_t past_samples() const override { return 128; }
  std::size_t future_samples() const override { return 320; }
  void reset() override;
  void compute_frame(std::span<const double> window,
                     std::span<double> out) override;

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Per-frame normalized cross-correlation candidates.
struct PitchCandidate {
  double f0_hz = 0.0;
  double r = 0.0;
};
struct PitchFrame {
  std::vector<PitchCandidate> candidates;  // best first, at most 6
  double r_max = 0.0;
};
// `window` is the 640-sample span [64 t - 256, 64 t + 384).
PitchFrame analyze_pitch_frame(std::span<const double> window);

// Dynamic-programming smoother over per-frame candidates. State 0 is
// unvoiced; state i > 0 is candidate i - 1.
class PitchSmoother {
 public:
  void reset();
  // Causal decision for the newest frame: argmin of accumulated cost.
  std::pair<double, int> push(const PitchFrame& frame);
  // Full-utterance Viterbi with backtracking.
  static PitchTrack viterbi(const std::vector<PitchFrame>& frames);

 private:
  std::vector<double> cost_;
  std::vector<double> f0_;
};

class PitchStage : public FrameStage {
 public:
  std::string name() const override { return "pitch"; }
  std::size_t width() const override { return 2; }  // f0, voicing
  std::size_t past_samples() const override { return 256; }
  std::size_t future_samples() const override { return 320; }
  void reset() override { smoother_.reset(); }
  void compute_frame(std::span<const double> window,
                     std::span<double> out) override;

 private:
  PitchSmoother smoother_;
};

// Long-term log-mel identity embedding. Offline it averages over the whole
// utterance; the stage keeps an exponential moving average (1 s time
// constant) and emits the embedding of the running average every frame.
class IdentityStage : public FrameStage {
 public:
  explicit IdentityStage(std::uint64_t seed);
  std::string name() const override { return "identity"; }
  std::size_t width() const override { return kIdentityDim; }
  std::size_t past_samples() const override { return 448; }
  std::size_t future_samples() const override { return 0; }
  void reset() override;
  void compute_frame(std::span<const double> window,
                     std::span<double> out) override;

  // log-mel of the 512-sample frame ending at the frame end.
  static std::vector<double> frame_log_mel(std::span<const double> window);
  // Centers across bands, projects, and L2-normalizes (e0 for a zero vector).
  std::vector<double> embed(std::span<const double> log_mel) const;

 private:
  Matrix projection_;  // [kIdentityDim x kMelBands]
  std::vector<double> ema_;
  bool started_ = false;
};

// ---- Providers -------------------------------------------------------------------

class ContentProvider {
 public:
  virtual ~ContentProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual ContentTrack extract(const Waveform& x) = 0;
  virtual std::unique_ptr<FrameStage> make_stage() const = 0;
};

// Log-mel stub: per-utterance scalar mean/variance normalization offline.
class LogMelContentProvider : public ContentProvider {
 public:
  std::string name() const override { return "logmel"; }
  std::size_t dim() const override { return kMelBands; }
  ContentTrack extract(const Waveform& x) override;
  std::unique_ptr<FrameStage> make_stage() const override;
};

class IdentityProvider {
 public:
  virtual ~IdentityProvider() = default;
  virtual std::string name() const = 0;
  virtual IdentityVector extract(const Waveform& x) = 0;
  virtual std::unique_ptr<FrameStage> make_stage() const = 0;
};

class ProjectionIdentityProvider : public IdentityProvider {
 public:
  explicit ProjectionIdentityProvider(std::uint64_t seed = 1234);
  std::string name() const override { return "logmel_projection"; }
  IdentityVector extract(const Waveform& x) override;
  std::unique_ptr<FrameStage> make_stage() const override;

 private:
  std::uint64_t seed_;
};

// ---- Extraction -------------------------------------------------------------------

// Offline pitch: per-frame candidates then full Viterbi. Throws ArgumentError
// for inputs shorter than 640 samples or not at 16 kHz.
PitchTrack extract_pitch(const Waveform& x,
                         FeatureMode mode = FeatureMode::kOffline);
LoudnessTrack extract_loudness(const Waveform& x);
ContentTrack extract_content(const Waveform& x);
// Throws ArgumentError for inputs shorter than 0.5 s.
IdentityVector extract_identity(const Waveform& x, std::uint64_t seed = 1234);

// Concatenates the tracks on the 250 Hz grid, trimming to the shortest.
ConditioningTrack assemble_conditioning(const ContentTrack& content,
                                        const PitchTrack& pitch,
                                        const LoudnessTrack& loudness,
                                        const IdentityVector& identity);

struct EncoderConfig {
  std::string pre_enhancer = "passthrough";
  double gate_threshold = 0.05;
  std::string content = "logmel";
  std::string identity = "logmel_projection";
  std::uint64_t identity_seed = 1234;
  // Worker threads for offline extraction (0 = REGEN_NUM_THREADS or 1).
  int threads = 0;
};

// The full encoder E(x): pre-enhancement followed by the four feature
// extractors.
class FeatureEncoder {
 public:
  explicit FeatureEncoder(EncoderConfig config = {});

  const EncoderConfig& config() const { return config_; }
  std::size_t content_dim() const { return content_->dim(); }

  Waveform pre_enhance(const Waveform& x);
  // Offline mode: utterance-level normalization, Viterbi pitch, one identity
  // vector. Causal mode: the streaming stages run over the whole signal.
  ConditioningTrack encode(const Waveform& x, FeatureMode mode);
  // Encodes an already enhanced signal.
  ConditioningTrack encode_enhanced(const Waveform& x, FeatureMode mode);

  std::unique_ptr<PreEnhancer> make_pre_enhancer() const;
  // Causal stages in column order: content, pitch, loudness, identity.
  std::vector<std::unique_ptr<FrameStage>> make_stages() const;

 private:
  EncoderConfig config_;
  std::unique_ptr<ContentProvider> content_;
  std::unique_ptr<IdentityProvider> identity_;
};

// Builds one conditioning row from the four stage rows (content, pitch,
// loudness). Exposed so streaming and offline assembly share the scaling.
void conditioning_row(std::span<const double> content, double f0_hz,
                      int voiced, double dba, std::span<double> out);

// Assembles causal stage outputs (content, pitch, loudness, identity rows).
ConditioningTrack assemble_causal(const Matrix& content, const Matrix& pitch,
                                  const Matrix& loudness,
                                  const Matrix& identity);

// ---- Feature dump ------------------------------------------------------------------

std::vector<unsigned char> encode_feature_dump(const ConditioningTrack& track);
ConditioningTrack decode_feature_dump(std::span<const unsigned char> bytes);
void write_feature_dump(const ConditioningTrack& track,
                        const std::filesystem::path& path);
ConditioningTrack read_feature_dump(const std::filesystem::path& path);

}  // namespace regen

#endif  // REGEN_FEATURES_H_

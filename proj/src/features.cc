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

#include "regen/features.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <random>

#include "bytes.h"
#include "regen/dsp.h"
#include "regen/error.h"
#include "regen/parallel.h"

namespace regen {
namespace {

constexpr std::size_t kAnalysisFft = 512;
constexpr double kLogMelFloor = 1e-10;

void require_input_rate(const Waveform& x, const char* what) {
  if (x.sample_rate_hz != kInputRateHz) {
    throw ArgumentError(std::string(what) + " expects 16 kHz input, got " +
                        std::to_string(x.sample_rate_hz) + " Hz");
  }
}

std::size_t num_frames(std::size_t samples) {
  return (samples + kInputHop - 1) / kInputHop;
}

// Copies [start, start + n) of `x`, zero outside the signal.
void gather(std::span<const double> x, std::int64_t start,
            std::span<double> out) {
  const auto len = static_cast<std::int64_t>(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::int64_t j = start + static_cast<std::int64_t>(i);
    out[i] = (j >= 0 && j < len) ? x[static_cast<std::size_t>(j)] : 0.0;
  }
}

// Runs a provider call, converting foreign exceptions into ProviderError.
template <typename F>
auto guarded(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw ProviderError(stage, e.what());
  }
}

const Matrix& analysis_mel_weights() {
  static const Matrix w =
      dsp::mel_weights(kAnalysisFft, kInputRateHz, kMelBands, 0.0, 8000.0);
  return w;
}

const std::vector<double>& analysis_window() {
  static const std::vector<double> w = dsp::hann_window(kAnalysisFft);
  return w;
}

std::vector<double> log_mel_512(std::span<const double> frame) {
  const auto mag = dsp::frame_magnitude(frame, analysis_window());
  const Matrix& w = analysis_mel_weights();
  std::vector<double> out(kMelBands);
  for (std::size_t m = 0; m < w.rows; ++m) {
    const auto wr = w.row(m);
    double acc = 0.0;
    for (std::size_t k = 0; k < wr.size(); ++k) acc += wr[k] * mag[k] * mag[k];
    out[m] = std::log(std::max(acc, kLogMelFloor));
  }
  return out;
}

}  // namespace

// ---- StageRunner -------------------------------------------------------------------

StageRunner::StageRunner(FrameStage* stage) : stage_(stage) {}

void StageRunner::reset() {
  stage_->reset();
  buffer_.clear();
  buffer_start_ = 0;
  received_ = 0;
  next_frame_ = 0;
}

Matrix StageRunner::push(std::span<const double> samples) {
  buffer_.insert(buffer_.end(), samples.begin(), samples.end());
  received_ += samples.size();
  const std::size_t need = kInputHop + stage_->future_samples();
  const std::size_t ready =
      received_ >= need ? (received_ - need) / kInputHop + 1 : 0;
  return emit(ready);
}

Matrix StageRunner::finish() { return emit(num_frames(received_)); }

Matrix StageRunner::emit(std::size_t limit) {
  const std::size_t count = limit > next_frame_ ? limit - next_frame_ : 0;
  Matrix rows(count, stage_->width());
  std::vector<double> window(stage_->window_samples());
  const auto past = static_cast<std::int64_t>(stage_->past_samples());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t t = next_frame_ + i;
    const std::int64_t start = static_cast<std::int64_t>(t) * kInputHop - past;
    gather(buffer_, start - buffer_start_, window);
    stage_->compute_frame(window, rows.row(i));
  }
  next_frame_ += count;
  // Drop input that no later window can reach.
  const std::int64_t keep_from =
      static_cast<std::int64_t>(next_frame_) * kInputHop - past;
  if (keep_from > buffer_start_) {
    const auto drop = std::min<std::int64_t>(
        keep_from - buffer_start_, static_cast<std::int64_t>(buffer_.size()));
    buffer_.erase(buffer_.begin(), buffer_.begin() + drop);
    buffer_start_ += drop;
  }
  return rows;
}

Matrix run_stage(FrameStage& stage, std::span<const double> samples) {
  StageRunner runner(&stage);
  runner.reset();
  Matrix head = runner.push(samples);
  Matrix tail = runner.finish();
  Matrix all(head.rows + tail.rows, stage.width());
  std::copy(head.data.begin(), head.data.end(), all.data.begin());
  std::copy(tail.data.begin(), tail.data.end(),
            all.data.begin() + static_cast<std::ptrdiff_t>(head.data.size()));
  return all;
}

// ---- Pre-enhancement ---------------------------------------------------------------

Waveform PreEnhancer::process(const Waveform& x) {
  reset();
  std::vector<double> out = push(x.samples);
  const std::vector<double> tail = finish();
  out.insert(out.end(), tail.begin(), tail.end());
  reset();
  return Waveform(std::move(out), x.sample_rate_hz);
}

std::vector<double> PassthroughEnhancer::push(std::span<const double> samples) {
  return {samples.begin(), samples.end()};
}

SpectralGateEnhancer::SpectralGateEnhancer(double threshold)
    : threshold_(threshold), window_(kFrame) {
  if (!(threshold >= 0.0) || !std::isfinite(threshold)) {
    throw ArgumentError("spectral gate threshold must be finite and >= 0");
  }
  const auto hann = dsp::hann_window(kFrame);
  for (std::size_t i = 0; i < kFrame; ++i) window_[i] = std::sqrt(hann[i]);
}

void SpectralGateEnhancer::reset() {
  input_.clear();
  input_start_ = 0;
  received_ = 0;
  accum_.clear();
  emitted_ = 0;
  next_frame_start_ = -static_cast<std::int64_t>(kHop);
}

void SpectralGateEnhancer::process_frame(std::int64_t start) {
  std::vector<double> frame(kFrame);
  // Zero beyond the received input: only reached from finish().
  gather(input_, start - input_start_, frame);
  std::vector<std::complex<double>> buf(kFrame);
  for (std::size_t i = 0; i < kFrame; ++i) buf[i] = frame[i] * window_[i];
  const auto plan = dsp::FftPlan::Get(kFrame);
  plan->forward(buf);
  for (auto& c : buf) {
    if (std::abs(c) < threshold_) c = 0.0;
  }
  plan->inverse_unscaled(buf);
  const std::size_t need =
      static_cast<std::size_t>(std::max<std::int64_t>(0, start + static_cast<std::int64_t>(kFrame)) -
                               static_cast<std::int64_t>(emitted_));
  if (accum_.size() < need) accum_.resize(need, 0.0);
  for (std::size_t i = 0; i < kFrame; ++i) {
    const std::int64_t n = start + static_cast<std::int64_t>(i);
    if (n < static_cast<std::int64_t>(emitted_)) continue;
    accum_[static_cast<std::size_t>(n) - emitted_] +=
        buf[i].real() / static_cast<double>(kFrame) * window_[i];
  }
}

std::vector<double> SpectralGateEnhancer::take_ready(std::size_t limit) {
  if (limit <= emitted_) return {};
  const std::size_t n = limit - emitted_;
  if (accum_.size() < n) accum_.resize(n, 0.0);
  std::vector<double> out(accum_.begin(), accum_.begin() + static_cast<std::ptrdiff_t>(n));
  accum_.erase(accum_.begin(), accum_.begin() + static_cast<std::ptrdiff_t>(n));
  emitted_ = limit;
  return out;
}

std::int64_t SpectralGateEnhancer::input_reach(std::int64_t j) const {
  const auto hop = static_cast<std::int64_t>(kHop);
  const std::int64_t q = j - 1;
  const std::int64_t start = (q >= 0 ? q / hop : -((-q + hop - 1) / hop)) * hop;
  return start + static_cast<std::int64_t>(kFrame) - 1;
}

std::vector<double> SpectralGateEnhancer::push(std::span<const double> samples) {
  input_.insert(input_.end(), samples.begin(), samples.end());
  received_ += samples.size();
  std::vector<double> out;
  while (next_frame_start_ + static_cast<std::int64_t>(kFrame) <=
         static_cast<std::int64_t>(received_)) {
    process_frame(next_frame_start_);
    next_frame_start_ += kHop;
    const auto ready = take_ready(static_cast<std::size_t>(next_frame_start_));
    out.insert(out.end(), ready.begin(), ready.end());
  }
  // Samples before the next frame start are no longer needed.
  if (next_frame_start_ > input_start_) {
    const auto drop = std::min<std::int64_t>(next_frame_start_ - input_start_,
                                             static_cast<std::int64_t>(input_.size()));
    input_.erase(input_.begin(), input_.begin() + drop);
    input_start_ += drop;
  }
  return out;
}

std::vector<double> SpectralGateEnhancer::finish() {
  std::vector<double> out;
  while (emitted_ < received_) {
    process_frame(next_frame_start_);
    next_frame_start_ += kHop;
    const auto ready = take_ready(std::min<std::size_t>(
        static_cast<std::size_t>(std::max<std::int64_t>(next_frame_start_, 0)),
        received_));
    out.insert(out.end(), ready.begin(), ready.end());
  }
  return out;
}

std::unique_ptr<PreEnhancer> make_pre_enhancer(const std::string& name,
                                               double gate_threshold) {
  if (name == "passthrough") return std::make_unique<PassthroughEnhancer>();
  if (name == "spectral_gate") {
    return std::make_unique<SpectralGateEnhancer>(gate_threshold);
  }
  throw ArgumentError("unknown pre-enhancer '" + name + "'");
}

// ---- Loudness ----------------------------------------------------------------------

LoudnessStage::LoudnessStage()
    : hann_(dsp::hann_window(kAnalysisFft)), weight2_(kAnalysisFft / 2 + 1) {
  weight2_[0] = 0.0;
  for (std::size_t k = 1; k < weight2_.size(); ++k) {
    const double g = dsp::a_weight_gain(static_cast<double>(k) * kInputRateHz /
                                        static_cast<double>(kAnalysisFft));
    weight2_[k] = g * g;
  }
}

void LoudnessStage::compute_frame(std::span<const double> window,
                                  std::span<double> out) {
  const auto mag = dsp::frame_magnitude(window, hann_);
  double power = 0.0;
  const std::size_t last = mag.size() - 1;
  for (std::size_t k = 0; k <= last; ++k) {
    const double p = mag[k] * mag[k] * weight2_[k];
    power += (k == 0 || k == last) ? p : 2.0 * p;
  }
  double w2 = 0.0;
  for (double w : hann_) w2 += w * w;
  const double mean_square = power / (static_cast<double>(kAnalysisFft) * w2);
  const double db = 10.0 * std::log10(std::max(mean_square, 1e-8));
  out[0] = std::clamp(db, kLoudnessFloorDb, kLoudnessCeilDb);
}

LoudnessTrack extract_loudness(const Waveform& x) {
  require_input_rate(x, "extract_loudness");
  LoudnessStage stage;
  const Matrix rows = run_stage(stage, x.samples);
  return {rows.data, kFrameRateHz};
}

// ---- Content -----------------------------------------------------------------------

std::vector<double> content_log_mel(std::span<const double> window) {
  return log_mel_512(window);
}

void ContentStage::reset() {
  count_ = 0;
  mean_ = 0.0;
  m2_ = 0.0;
}

void ContentStage::compute_frame(std::span<const double> window,
                                 std::span<double> out) {
  const auto lm = content_log_mel(window);
  for (double v : lm) {
    ++count_;
    const double d = v - mean_;
    mean_ += d / static_cast<double>(count_);
    m2_ += d * (v - mean_);
  }
  const double sd = std::sqrt(m2_ / static_cast<double>(count_) + 1e-8);
  for (std::size_t i = 0; i < lm.size(); ++i) out[i] = (lm[i] - mean_) / sd;
}

ContentTrack LogMelContentProvider::extract(const Waveform& x) {
  require_input_rate(x, "extract_content");
  const std::size_t frames = num_frames(x.size());
  ContentTrack track{Matrix(frames, kMelBands), kFrameRateHz};
  std::vector<double> window(kAnalysisFft);
  double sum = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    gather(x.samples, static_cast<std::int64_t>(t) * kInputHop - 128, window);
    const auto lm = content_log_mel(window);
    std::copy(lm.begin(), lm.end(), track.values.row(t).begin());
    for (double v : lm) sum += v;
  }
  if (frames == 0) return track;
  const double n = static_cast<double>(track.values.data.size());
  const double mean = sum / n;
  double var = 0.0;
  for (double v : track.values.data) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n + 1e-8);
  for (double& v : track.values.data) v = (v - mean) / sd;
  return track;
}

std::unique_ptr<FrameStage> LogMelContentProvider::make_stage() const {
  return std::make_unique<ContentStage>();
}

ContentTrack extract_content(const Waveform& x) {
  LogMelContentProvider provider;
  return guarded("content", [&] { return provider.extract(x); });
}

// ---- Pitch -------------------------------------------------------------------------

namespace {

constexpr std::size_t kNccfWindow = 320;
constexpr std::size_t kMinLag = 27;   // 16000 / 600, rounded up
constexpr std::size_t kMaxLag = 320;  // 16000 / 50
constexpr double kVoicingThreshold = 0.3;
constexpr std::size_t kMaxCandidates = 6;
constexpr double kEnergyGate = 1e-7;  // mean square of the reference segment
constexpr double kLagWeight = 0.3;
constexpr double kOctaveCost = 0.6;
constexpr double kVoicingSwitchCost = 0.2;

double local_cost(const PitchFrame& f, std::size_t state) {
  if (state == 0) return f.r_max;
  const auto& c = f.candidates[state - 1];
  const double lag = kInputRateHz / c.f0_hz;
  return 1.0 - c.r * (1.0 - kLagWeight * lag / static_cast<double>(kMaxLag));
}

double transition_cost(double f_from, double f_to) {
  const bool v_from = f_from > 0.0, v_to = f_to > 0.0;
  if (v_from && v_to) return kOctaveCost * std::abs(std::log2(f_to / f_from));
  if (v_from != v_to) return kVoicingSwitchCost;
  return 0.0;
}

std::vector<double> state_f0(const PitchFrame& f) {
  std::vector<double> out{0.0};
  for (const auto& c : f.candidates) out.push_back(c.f0_hz);
  return out;
}

}  // namespace

PitchFrame analyze_pitch_frame(std::span<const double> window) {
  if (window.size() != kNccfWindow + kMaxLag) {
    throw ShapeError("pitch analysis expects a 640-sample window");
  }
  PitchFrame frame;
  double e0 = 0.0;
  for (std::size_t n = 0; n < kNccfWindow; ++n) e0 += window[n] * window[n];
  if (e0 / kNccfWindow < kEnergyGate) return frame;

  // r[lag] for lag in [kMinLag - 1, kMaxLag].
  std::vector<double> r(kMaxLag + 1, 0.0);
  double elag = 0.0;
  const std::size_t first = kMinLag - 1;
  for (std::size_t n = 0; n < kNccfWindow; ++n) {
    elag += window[first + n] * window[first + n];
  }
  for (std::size_t lag = first; lag <= kMaxLag; ++lag) {
    if (lag > first) {
      const double out = window[lag - 1];
      const double in = window[lag + kNccfWindow - 1];
      elag += in * in - out * out;
    }
    double c = 0.0;
    for (std::size_t n = 0; n < kNccfWindow; ++n) c += window[n] * window[n + lag];
    const double denom = std::sqrt(e0 * std::max(elag, 0.0));
    r[lag] = denom > 0.0 ? c / denom : 0.0;
  }

  for (std::size_t lag = kMinLag; lag < kMaxLag; ++lag) {
    const double a = r[lag - 1], b = r[lag], c = r[lag + 1];
    if (b <= kVoicingThreshold || b < a || b <= c) continue;
    const double curv = a - 2.0 * b + c;
    double delta = 0.0;
    double peak = b;
    if (curv < 0.0) {
      delta = 0.5 * (a - c) / curv;
      delta = std::clamp(delta, -0.5, 0.5);
      peak = b - 0.25 * (a - c) * delta;
    }
    const double f0 = std::clamp(kInputRateHz / (static_cast<double>(lag) + delta),
                                 kMinF0Hz, kMaxF0Hz);
    frame.candidates.push_back({f0, std::min(peak, 1.0)});
  }
  // Rank by the lag-weighted score so that, on near-periodic input where every
  // period multiple correlates almost perfectly, the shortest lags survive.
  auto score = [](const PitchCandidate& c) {
    return c.r * (1.0 - kLagWeight * (kInputRateHz / c.f0_hz) / static_cast<double>(kMaxLag));
  };
  for (const auto& c : frame.candidates) frame.r_max = std::max(frame.r_max, c.r);
  std::stable_sort(frame.candidates.begin(), frame.candidates.end(),
                   [&](const PitchCandidate& x, const PitchCandidate& y) {
                     return score(x) > score(y);
                   });
  if (frame.candidates.size() > kMaxCandidates) {
    frame.candidates.resize(kMaxCandidates);
  }
  return frame;
}

void PitchSmoother::reset() {
  cost_.clear();
  f0_.clear();
}

std::pair<double, int> PitchSmoother::push(const PitchFrame& frame) {
  const auto f0 = state_f0(frame);
  std::vector<double> cost(f0.size());
  for (std::size_t j = 0; j < f0.size(); ++j) {
    double best = 0.0;
    if (!cost_.empty()) {
      best = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < cost_.size(); ++i) {
        best = std::min(best, cost_[i] + transition_cost(f0_[i], f0[j]));
      }
    }
    cost[j] = best + local_cost(frame, j);
  }
  const auto it = std::min_element(cost.begin(), cost.end());
  const std::size_t arg = static_cast<std::size_t>(it - cost.begin());
  const double floor = *it;
  for (double& c : cost) c -= floor;
  cost_ = std::move(cost);
  f0_ = f0;
  return {f0[arg], arg == 0 ? 0 : 1};
}

PitchTrack PitchSmoother::viterbi(const std::vector<PitchFrame>& frames) {
  PitchTrack track;
  const std::size_t n = frames.size();
  track.f0_hz.assign(n, 0.0);
  track.voicing.assign(n, 0);
  if (n == 0) return track;
  std::vector<std::vector<double>> f0(n);
  std::vector<std::vector<std::size_t>> back(n);
  std::vector<double> cost;
  for (std::size_t t = 0; t < n; ++t) {
    f0[t] = state_f0(frames[t]);
    std::vector<double> next(f0[t].size());
    back[t].assign(f0[t].size(), 0);
    for (std::size_t j = 0; j < f0[t].size(); ++j) {
      double best = 0.0;
      if (t > 0) {
        best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < cost.size(); ++i) {
          const double c = cost[i] + transition_cost(f0[t - 1][i], f0[t][j]);
          if (c < best) {
            best = c;
            back[t][j] = i;
          }
        }
      }
      next[j] = best + local_cost(frames[t], j);
    }
    cost = std::move(next);
  }
  std::size_t state = static_cast<std::size_t>(
      std::min_element(cost.begin(), cost.end()) - cost.begin());
  for (std::size_t t = n; t-- > 0;) {
    track.f0_hz[t] = f0[t][state];
    track.voicing[t] = state == 0 ? 0 : 1;
    state = back[t][state];
  }
  return track;
}

void PitchStage::compute_frame(std::span<const double> window,
                               std::span<double> out) {
  const auto [f0, voiced] = smoother_.push(analyze_pitch_frame(window));
  out[0] = f0;
  out[1] = voiced;
}

PitchTrack extract_pitch(const Waveform& x, FeatureMode mode) {
  require_input_rate(x, "extract_pitch");
  if (x.size() < kNccfWindow + kMaxLag) {
    throw ArgumentError("pitch tracking needs at least 640 samples (40 ms), got " +
                        std::to_string(x.size()));
  }
  if (mode == FeatureMode::kCausal) {
    PitchStage stage;
    const Matrix rows = run_stage(stage, x.samples);
    PitchTrack track;
    for (std::size_t t = 0; t < rows.rows; ++t) {
      track.f0_hz.push_back(rows.at(t, 0));
      track.voicing.push_back(static_cast<int>(rows.at(t, 1)));
    }
    return track;
  }
  const std::size_t frames = num_frames(x.size());
  std::vector<PitchFrame> analyses(frames);
  std::vector<double> window(kNccfWindow + kMaxLag);
  for (std::size_t t = 0; t < frames; ++t) {
    gather(x.samples, static_cast<std::int64_t>(t) * kInputHop - 256, window);
    analyses[t] = analyze_pitch_frame(window);
  }
  return PitchSmoother::viterbi(analyses);
}

// ---- Identity ----------------------------------------------------------------------

IdentityStage::IdentityStage(std::uint64_t seed)
    : projection_(kIdentityDim, kMelBands) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  for (double& v : projection_.data) v = normal(rng);
}

void IdentityStage::reset() {
  ema_.clear();
  started_ = false;
}

std::vector<double> IdentityStage::frame_log_mel(std::span<const double> window) {
  return log_mel_512(window);
}

std::vector<double> IdentityStage::embed(std::span<const double> log_mel) const {
  if (log_mel.size() != kMelBands) {
    throw ShapeError("identity embedding expects 40 log-mel bands");
  }
  double mean = 0.0;
  for (double v : log_mel) mean += v;
  mean /= kMelBands;
  std::vector<double> out(kIdentityDim, 0.0);
  double norm = 0.0;
  for (std::size_t i = 0; i < kIdentityDim; ++i) {
    const auto row = projection_.row(i);
    double acc = 0.0;
    for (std::size_t m = 0; m < kMelBands; ++m) acc += row[m] * (log_mel[m] - mean);
    out[i] = acc;
    norm += acc * acc;
  }
  norm = std::sqrt(norm);
  if (norm < 1e-12) {
    std::fill(out.begin(), out.end(), 0.0);
    out[0] = 1.0;
    return out;
  }
  for (double& v : out) v /= norm;
  return out;
}

void IdentityStage::compute_frame(std::span<const double> window,
                                  std::span<double> out) {
  const auto lm = frame_log_mel(window);
  if (!started_) {
    ema_ = lm;
    started_ = true;
  } else {
    // One-second time constant at 250 frames per second.
    static const double alpha = 1.0 - std::exp(-1.0 / kFrameRateHz);
    for (std::size_t m = 0; m < ema_.size(); ++m) ema_[m] += alpha * (lm[m] - ema_[m]);
  }
  const auto e = embed(ema_);
  std::copy(e.begin(), e.end(), out.begin());
}

ProjectionIdentityProvider::ProjectionIdentityProvider(std::uint64_t seed)
    : seed_(seed) {}

IdentityVector ProjectionIdentityProvider::extract(const Waveform& x) {
  require_input_rate(x, "extract_identity");
  if (x.size() < kInputRateHz / 2) {
    throw ArgumentError("identity needs at least 0.5 s of audio, got " +
                        std::to_string(x.duration_s()) + " s");
  }
  IdentityStage stage(seed_);
  const std::size_t frames = num_frames(x.size());
  std::vector<double> avg(kMelBands, 0.0);
  std::vector<double> window(kAnalysisFft);
  for (std::size_t t = 0; t < frames; ++t) {
    gather(x.samples, static_cast<std::int64_t>(t) * kInputHop - 448, window);
    const auto lm = IdentityStage::frame_log_mel(window);
    for (std::size_t m = 0; m < kMelBands; ++m) avg[m] += lm[m];
  }
  for (double& v : avg) v /= static_cast<double>(frames);
  return {stage.embed(avg)};
}

std::unique_ptr<FrameStage> ProjectionIdentityProvider::make_stage() const {
  return std::make_unique<IdentityStage>(seed_);
}

IdentityVector extract_identity(const Waveform& x, std::uint64_t seed) {
  ProjectionIdentityProvider provider(seed);
  return guarded("identity", [&] { return provider.extract(x); });
}

// ---- Assembly ----------------------------------------------------------------------

namespace {

// Maps frame t of the 250 Hz grid to the nearest earlier source frame.
std::size_t source_frame(std::size_t t, int source_rate) {
  return static_cast<std::size_t>(static_cast<std::int64_t>(t) * source_rate /
                                  kFrameRateHz);
}

std::size_t grid_frames(std::size_t n, int source_rate) {
  if (source_rate <= 0) throw ArgumentError("track frame rate must be positive");
  return static_cast<std::size_t>(static_cast<std::int64_t>(n) * kFrameRateHz /
                                  source_rate);
}

}  // namespace

void conditioning_row(std::span<const double> content, double f0_hz,
                      int voiced, double dba, std::span<double> out) {
  std::copy(content.begin(), content.end(), out.begin());
  const std::size_t d = content.size();
  const bool v = voiced != 0 && f0_hz > 0.0;
  out[d] = v ? std::log2(f0_hz / kMinF0Hz) : 0.0;
  out[d + 1] = v ? 1.0 : 0.0;
  out[d + 2] = (dba - kLoudnessFloorDb) / 50.0 - 1.0;
}

ConditioningTrack assemble_conditioning(const ContentTrack& content,
                                        const PitchTrack& pitch,
                                        const LoudnessTrack& loudness,
                                        const IdentityVector& identity) {
  if (pitch.f0_hz.size() != pitch.voicing.size()) {
    throw ShapeError("pitch track f0/voicing lengths differ");
  }
  const std::size_t n = std::min(
      {grid_frames(content.values.rows, content.frame_rate_hz),
       grid_frames(pitch.size(), pitch.frame_rate_hz),
       grid_frames(loudness.size(), loudness.frame_rate_hz)});
  if (n == 0) throw ArgumentError("conditioning tracks share no frames");
  const std::size_t d = content.values.cols;
  ConditioningTrack out;
  out.frame_matrix = Matrix(n, d + 3);
  out.identity = identity;
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t ci = source_frame(t, content.frame_rate_hz);
    const std::size_t pi = source_frame(t, pitch.frame_rate_hz);
    const std::size_t li = source_frame(t, loudness.frame_rate_hz);
    conditioning_row(content.values.row(ci), pitch.f0_hz[pi], pitch.voicing[pi],
                     loudness.dba[li], out.frame_matrix.row(t));
  }
  return out;
}

ConditioningTrack assemble_causal(const Matrix& content, const Matrix& pitch,
                                  const Matrix& loudness,
                                  const Matrix& identity) {
  const std::size_t n =
      std::min({content.rows, pitch.rows, loudness.rows, identity.rows});
  if (n == 0) throw ArgumentError("conditioning tracks share no frames");
  ConditioningTrack out;
  out.frame_matrix = Matrix(n, content.cols + 3);
  out.frame_identity = Matrix(n, identity.cols);
  for (std::size_t t = 0; t < n; ++t) {
    conditioning_row(content.row(t), pitch.at(t, 0),
                     static_cast<int>(pitch.at(t, 1)), loudness.at(t, 0),
                     out.frame_matrix.row(t));
    std::copy(identity.row(t).begin(), identity.row(t).end(),
              out.frame_identity.row(t).begin());
  }
  const auto last = identity.row(n - 1);
  out.identity.values.assign(last.begin(), last.end());
  return out;
}

// ---- Encoder -----------------------------------------------------------------------

FeatureEncoder::FeatureEncoder(EncoderConfig config)
    : config_(std::move(config)) {
  if (config_.content != "logmel") {
    throw ArgumentError("unknown content provider '" + config_.content + "'");
  }
  if (config_.identity != "logmel_projection") {
    throw ArgumentError("unknown identity provider '" + config_.identity + "'");
  }
  make_pre_enhancer();  // validates the name
  content_ = std::make_unique<LogMelContentProvider>();
  identity_ = std::make_unique<ProjectionIdentityProvider>(config_.identity_seed);
}

std::unique_ptr<PreEnhancer> FeatureEncoder::make_pre_enhancer() const {
  return regen::make_pre_enhancer(config_.pre_enhancer, config_.gate_threshold);
}

std::vector<std::unique_ptr<FrameStage>> FeatureEncoder::make_stages() const {
  std::vector<std::unique_ptr<FrameStage>> stages;
  stages.push_back(content_->make_stage());
  stages.push_back(std::make_unique<PitchStage>());
  stages.push_back(std::make_unique<LoudnessStage>());
  stages.push_back(identity_->make_stage());
  return stages;
}

Waveform FeatureEncoder::pre_enhance(const Waveform& x) {
  require_input_rate(x, "pre_enhance");
  auto pe = make_pre_enhancer();
  return guarded("pre_enhance", [&] { return pe->process(x); });
}

ConditioningTrack FeatureEncoder::encode(const Waveform& x, FeatureMode mode) {
  return encode_enhanced(pre_enhance(x), mode);
}

ConditioningTrack FeatureEncoder::encode_enhanced(const Waveform& x,
                                                  FeatureMode mode) {
  require_input_rate(x, "encode");
  const int threads = config_.threads > 0 ? config_.threads : configured_threads();
  if (mode == FeatureMode::kCausal) {
    auto stages = make_stages();
    std::vector<Matrix> rows(stages.size());
    std::vector<std::function<void()>> tasks;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      tasks.push_back([&, i] {
        rows[i] = guarded(stages[i]->name(),
                          [&] { return run_stage(*stages[i], x.samples); });
      });
    }
    run_parallel(tasks, threads);
    return assemble_causal(rows[0], rows[1], rows[2], rows[3]);
  }
  ContentTrack content;
  PitchTrack pitch;
  LoudnessTrack loudness;
  IdentityVector identity;
  run_parallel(
      {[&] { content = guarded("content", [&] { return content_->extract(x); }); },
       [&] { pitch = guarded("pitch", [&] { return extract_pitch(x); }); },
       [&] { loudness = guarded("loudness", [&] { return extract_loudness(x); }); },
       [&] {
         identity = guarded("identity", [&] { return identity_->extract(x); });
       }},
      threads);
  return assemble_conditioning(content, pitch, loudness, identity);
}

// ---- Feature dump ------------------------------------------------------------------

namespace {
constexpr char kDumpMagic[] = "RGNF";
constexpr std::uint32_t kDumpVersion = 1;
}  // namespace

std::vector<unsigned char> encode_feature_dump(const ConditioningTrack& track) {
  if (track.frame_matrix.cols < 3) throw ShapeError("conditioning track has no columns");
  if (track.identity.values.size() != kIdentityDim) {
    throw ShapeError("identity vector must have 256 values");
  }
  bytes::Writer w;
  w.raw(kDumpMagic);
  w.u32(kDumpVersion);
  w.u32(static_cast<std::uint32_t>(track.frame_rate_hz));
  w.u32(static_cast<std::uint32_t>(track.content_dim()));
  w.u32(static_cast<std::uint32_t>(track.frames()));
  for (double v : track.frame_matrix.data) w.f32(v);
  for (double v : track.identity.values) w.f32(v);
  return std::move(w.data());
}

ConditioningTrack decode_feature_dump(std::span<const unsigned char> in) {
  bytes::Reader r(in, "feature dump");
  if (r.raw(4) != kDumpMagic) throw ParseError("feature dump: bad magic");
  const std::uint32_t version = r.u32();
  if (version != kDumpVersion) {
    throw FormatVersionError("feature dump version " + std::to_string(version) +
                             " is not supported");
  }
  ConditioningTrack track;
  track.frame_rate_hz = static_cast<int>(r.u32());
  const std::size_t dim = r.u32();
  const std::size_t frames = r.u32();
  const std::size_t cells = frames * (dim + 3);
  r.need((cells + kIdentityDim) * 4);
  track.frame_matrix = Matrix(frames, dim + 3);
  for (double& v : track.frame_matrix.data) v = r.f32();
  track.identity.values.resize(kIdentityDim);
  for (double& v : track.identity.values) v = r.f32();
  return track;
}

void write_feature_dump(const ConditioningTrack& track,
                        const std::filesystem::path& path) {
  write_file_atomic(path, encode_feature_dump(track));
}

ConditioningTrack read_feature_dump(const std::filesystem::path& path) {
  return decode_feature_dump(read_file_bytes(path));
}

}  // namespace regen

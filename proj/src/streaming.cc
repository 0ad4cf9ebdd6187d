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


#include "regen/streaming.h"

#include <algorithm>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

#include "regen/error.h"
#include "regen/random.h"

namespace regen {
namespace {

using Clock = std::chrono::steady_clock;

constexpr std::size_t kOutPerFrame = kOutputRateHz / kFrameRateHz;

double samples_to_ms(std::size_t n) { return 1000.0 * n / kInputRateHz; }

std::vector<double> padded_samples(const Waveform& x) {
  if (x.sample_rate_hz != kInputRateHz) {
    throw ArgumentError("streaming input must be 16 kHz");
  }
  std::vector<double> s = x.samples;
  s.resize((s.size() + kInputHop - 1) / kInputHop * kInputHop, 0.0);
  return s;
}

void append_rows(Matrix& dst, const Matrix& src) {
  if (src.rows == 0) return;
  dst.cols = src.cols;
  dst.data.insert(dst.data.end(), src.data.begin(), src.data.end());
  dst.rows += src.rows;
}

Matrix take_rows(Matrix& m, std::size_t n) {
  Matrix head(n, m.cols);
  std::copy_n(m.data.begin(), n * m.cols, head.data.begin());
  m.data.erase(m.data.begin(), m.data.begin() + n * m.cols);
  m.rows -= n;
  return head;
}

void append(std::vector<double>& dst, const std::vector<double>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

// Runs a provider callable, converting foreign exceptions to ProviderError.
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

std::size_t max_stage_future(const StreamParts& parts) {
  std::size_t h = 0;
  for (const auto& s : parts.stages) h = std::max(h, s->declared_future_samples());
  return h;
}

void require_causal(const StreamParts& parts) {
  if (!parts.generator) throw ArgumentError("stream has no generator");
  if (!parts.generator->config().causal) {
    throw ModeError("streaming needs a causal generator; this one uses "
                    "centered (offline) convolutions");
  }
}

}  // namespace

nlohmann::json LatencyBudget::to_json() const {
  nlohmann::json st = nlohmann::json::array();
  for (const auto& s : stages) {
    st.push_back({{"name", s.name},
                  {"receptive_field_ms", s.receptive_field_ms},
                  {"future_context_ms", s.future_context_ms},
                  {"compute_ms", s.compute_ms}});
  }
  return {{"stages", st},
          {"chunk_ms", chunk_ms},
          {"declared_horizon_samples", declared_horizon_samples},
          {"declared_horizon_ms", samples_to_ms(declared_horizon_samples)},
          {"total_latency_ms", total_latency_ms}};
}

StreamParts make_stream_parts(const FeatureEncoder& encoder, Generator& generator,
                              std::vector<double> z) {
  StreamParts parts;
  parts.pre = encoder.make_pre_enhancer();
  parts.stages = encoder.make_stages();
  parts.generator = &generator;
  parts.z = std::move(z);
  return parts;
}

StreamingPipeline::StreamingPipeline(StreamParts parts, double chunk_ms)
    : parts_(std::move(parts)), chunk_ms_(chunk_ms) {
  require_causal(parts_);
  if (!parts_.pre) throw ArgumentError("stream has no pre-enhancer");
  if (parts_.stages.size() != 4) {
    throw ArgumentError("stream needs content, pitch, loudness and identity stages");
  }
  const auto& g = parts_.generator->config();
  if (parts_.stages[0]->width() + 3 != static_cast<std::size_t>(g.input_channels()) ||
      parts_.stages[1]->width() != 2 || parts_.stages[2]->width() != 1 ||
      parts_.stages[3]->width() != static_cast<std::size_t>(g.id_dim)) {
    throw ShapeError("stage widths do not match the generator inputs");
  }
  const double samples = chunk_ms * kInputRateHz / 1000.0;
  if (!(samples >= 1.0) || std::floor(samples) != samples) {
    throw ArgumentError("chunk_ms must be positive and span a whole number of samples");
  }
  for (auto& s : parts_.stages) runners_.emplace_back(s.get());
  gen_stream_ = parts_.generator->open_stream(
      parts_.z, std::vector<double>(g.id_dim, 0.0));
  reset();
}

std::size_t StreamingPipeline::chunk_samples() const {
  return static_cast<std::size_t>(std::lround(chunk_ms_ * kInputRateHz / 1000.0));
}

void StreamingPipeline::reset() {
  parts_.pre->reset();
  for (auto& r : runners_) r.reset();
  pending_.assign(parts_.stages.size(), Matrix());
  gen_stream_->reset();
  received_ = 0;
  frames_emitted_ = 0;
  chunks_ = 0;
  compute_.assign(parts_.stages.size() + 2, std::chrono::nanoseconds(0));
}

std::size_t StreamingPipeline::declared_horizon_samples() const {
  // Worst case over 64 frame phases (4096 samples), which covers any
  // pre-enhancer hop dividing that period.
  const auto f = static_cast<std::int64_t>(max_stage_future(parts_));
  std::int64_t h = 0;
  for (std::int64_t t = 64; t < 128; ++t) {
    const std::int64_t end = t * static_cast<std::int64_t>(kInputHop) + kInputHop - 1;
    h = std::max(h, parts_.pre->input_reach(end + f) - end);
  }
  return static_cast<std::size_t>(h);
}

std::vector<double> StreamingPipeline::process_chunk(std::span<const double> chunk) {
  if (chunk.empty()) return {};
  const auto t0 = Clock::now();
  const std::vector<double> enhanced =
      guarded(parts_.pre->name(), [&] { return parts_.pre->push(chunk); });
  compute_[0] += Clock::now() - t0;
  received_ += chunk.size();
  ++chunks_;
  return feed_stages(enhanced, false);
}

std::vector<double> StreamingPipeline::finish() {
  const auto t0 = Clock::now();
  const std::vector<double> enhanced =
      guarded(parts_.pre->name(), [&] { return parts_.pre->finish(); });
  compute_[0] += Clock::now() - t0;
  return feed_stages(enhanced, true);
}

std::vector<double> StreamingPipeline::feed_stages(std::span<const double> enhanced,
                                                   bool final) {
  for (std::size_t i = 0; i < runners_.size(); ++i) {
    const auto t0 = Clock::now();
    guarded(parts_.stages[i]->name(), [&] {
      append_rows(pending_[i], runners_[i].push(enhanced));
      if (final) append_rows(pending_[i], runners_[i].finish());
      return 0;
    });
    compute_[i + 1] += Clock::now() - t0;
  }
  return drain(final);
}

std::vector<double> StreamingPipeline::drain(bool /*final*/) {
  std::size_t n = pending_[0].rows;
  for (const auto& p : pending_) n = std::min(n, p.rows);
  if (n == 0) return {};
  std::vector<Matrix> rows;
  for (auto& p : pending_) rows.push_back(take_rows(p, n));
  const auto t0 = Clock::now();
  const ConditioningTrack track = assemble_causal(rows[0], rows[1], rows[2], rows[3]);
  std::vector<double> out = gen_stream_->push(track.frame_matrix, track.frame_identity);
  compute_.back() += Clock::now() - t0;
  frames_emitted_ += n;
  return out;
}

Waveform StreamingPipeline::run(const Waveform& input) {
  const std::vector<double> x = padded_samples(input);
  reset();
  std::vector<double> out;
  const std::size_t step = chunk_samples();
  for (std::size_t i = 0; i < x.size(); i += step) {
    const std::size_t n = std::min(step, x.size() - i);
    append(out, process_chunk(std::span<const double>(x).subspan(i, n)));
  }
  append(out, finish());
  return Waveform(std::move(out), kOutputRateHz);
}

LatencyBudget StreamingPipeline::budget() const {
  LatencyBudget b;
  b.chunk_ms = chunk_ms_;
  b.declared_horizon_samples = declared_horizon_samples();
  const double per_chunk = chunks_ ? 1.0 / chunks_ : 0.0;
  auto ms = [&](std::chrono::nanoseconds d) { return d.count() * 1e-6 * per_chunk; };
  b.stages.push_back({parts_.pre->name(),
                      samples_to_ms(parts_.pre->receptive_field_samples()),
                      samples_to_ms(parts_.pre->future_samples()), ms(compute_[0])});
  for (std::size_t i = 0; i < parts_.stages.size(); ++i) {
    const FrameStage& s = *parts_.stages[i];
    b.stages.push_back({s.name(), samples_to_ms(s.window_samples()),
                        samples_to_ms(s.declared_future_samples()),
                        ms(compute_[i + 1])});
  }
  const ReceptiveField rf = receptive_field(parts_.generator->config());
  b.stages.push_back({"generator", rf.ms, 0.0, ms(compute_.back())});
  double longest = 0.0;
  for (std::size_t i = 1; i + 1 < b.stages.size(); ++i) {
    longest = std::max(longest, b.stages[i].future_context_ms + b.stages[i].compute_ms);
  }
  const auto& pre = b.stages.front();
  const auto& gen = b.stages.back();
  b.total_latency_ms = chunk_ms_ + pre.future_context_ms + pre.compute_ms + longest +
                       gen.future_context_ms + gen.compute_ms;
  return b;
}

// ---- Threaded execution ------------------------------------------------------------

namespace {

template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

  // False once the queue is closed.
  bool push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }
  // Empty once the queue is closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }
  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
};

struct SampleItem {
  std::vector<double> samples;
  bool final = false;
};
struct RowItem {
  Matrix rows;
  bool final = false;
};

}  // namespace

class ThreadedStream {
 public:
  static Waveform run(StreamingPipeline& p, const std::vector<double>& x,
                      std::size_t capacity) {
    const std::size_t n_stages = p.runners_.size();
    std::vector<std::unique_ptr<BoundedQueue<SampleItem>>> enhanced;
    std::vector<std::unique_ptr<BoundedQueue<RowItem>>> rows;
    for (std::size_t i = 0; i < n_stages; ++i) {
      enhanced.push_back(std::make_unique<BoundedQueue<SampleItem>>(capacity));
      rows.push_back(std::make_unique<BoundedQueue<RowItem>>(capacity));
    }
    std::mutex err_mu;
    std::exception_ptr error;
    auto fail = [&](std::exception_ptr e) {
      {
        std::lock_guard lock(err_mu);
        if (!error) error = e;
      }
      for (auto& q : enhanced) q->close();
      for (auto& q : rows) q->close();
    };

    std::vector<std::thread> workers;
    workers.emplace_back([&] {
      try {
        const std::size_t step = p.chunk_samples();
        for (std::size_t i = 0; i <= x.size(); i += step) {
          SampleItem item;
          if (i < x.size()) {
            const std::size_t n = std::min(step, x.size() - i);
            item.samples = guarded(p.parts_.pre->name(), [&] {
              return p.parts_.pre->push(std::span<const double>(x).subspan(i, n));
            });
          } else {
            item.samples = guarded(p.parts_.pre->name(), [&] { return p.parts_.pre->finish(); });
            item.final = true;
          }
          for (auto& q : enhanced) {
            if (!q->push(item)) return;
          }
          if (item.final) return;
        }
      } catch (...) {
        fail(std::current_exception());
      }
    });
    for (std::size_t s = 0; s < n_stages; ++s) {
      workers.emplace_back([&, s] {
        try {
          while (auto item = enhanced[s]->pop()) {
            RowItem out;
            out.final = item->final;
            out.rows = guarded(p.parts_.stages[s]->name(), [&] {
              Matrix r = p.runners_[s].push(item->samples);
              if (item->final) append_rows(r, p.runners_[s].finish());
              return r;
            });
            const bool final = out.final;
            if (!rows[s]->push(std::move(out)) || final) return;
          }
        } catch (...) {
          fail(std::current_exception());
        }
      });
    }

    std::vector<double> out;
    try {
      bool done = false;
      while (!done) {
        for (std::size_t s = 0; s < n_stages; ++s) {
          auto item = rows[s]->pop();
          if (!item) {
            done = true;
            break;
          }
          append_rows(p.pending_[s], item->rows);
          done = item->final;
        }
        if (!error) append(out, p.drain(done));
      }
    } catch (...) {
      fail(std::current_exception());
    }
    for (auto& w : workers) w.join();
    if (error) std::rethrow_exception(error);
    return Waveform(std::move(out), kOutputRateHz);
  }
};

Waveform run_threaded(StreamParts parts, const Waveform& input, double chunk_ms,
                      std::size_t queue_capacity) {
  StreamingPipeline p(std::move(parts), chunk_ms);
  return ThreadedStream::run(p, padded_samples(input), queue_capacity);
}

// ---- Offline reference, probes and timing ------------------------------------------

Waveform offline_causal(StreamParts& parts, const Waveform& input) {
  require_causal(parts);
  const Waveform x(padded_samples(input), kInputRateHz);
  const Waveform enhanced =
      guarded(parts.pre->name(), [&] { return parts.pre->process(x); });
  std::vector<Matrix> rows;
  for (auto& s : parts.stages) {
    rows.push_back(guarded(s->name(), [&] { return run_stage(*s, enhanced.samples); }));
  }
  const ConditioningTrack cond = assemble_causal(rows[0], rows[1], rows[2], rows[3]);
  return parts.generator->generate(cond, parts.z);
}

namespace {

void scramble_tail(std::vector<double>& x, std::size_t from, Rng& rng) {
  for (std::size_t i = from; i < x.size(); ++i) x[i] = 2.0 * rng.uniform() - 1.0;
}

bool same_prefix(const std::vector<double>& a, const std::vector<double>& b,
                 std::size_t n) {
  n = std::min({n, a.size(), b.size()});
  return std::equal(a.begin(), a.begin() + n, b.begin());
}

}  // namespace

ProbeResult causality_probe(StreamParts& parts, const Waveform& input,
                            std::size_t t, std::uint64_t seed) {
  require_causal(parts);
  const std::vector<double> x = padded_samples(input);
  if (t >= x.size()) {
    throw ArgumentError("probe position " + std::to_string(t) +
                        " lies beyond the input");
  }
  Rng rng(seed);
  const std::size_t frame = t / kInputHop;
  const std::size_t frame_end = frame * kInputHop + kInputHop - 1;
  ProbeResult result;
  auto fail = [&](const std::string& stage, const std::string& detail) {
    result.passed = false;
    result.offending_stage = stage;
    result.detail = detail;
    return result;
  };

  // Pre-enhancer: the enhanced samples any stage may read for this frame.
  PreEnhancer& pre = *parts.pre;
  const std::size_t enhanced_needed = frame_end + max_stage_future(parts);
  const Waveform base_in(x, kInputRateHz);
  const Waveform enhanced = pre.process(base_in);
  {
    std::vector<double> y = x;
    scramble_tail(y, enhanced_needed + pre.future_samples() + 1, rng);
    const Waveform other = pre.process(Waveform(y, kInputRateHz));
    if (!same_prefix(enhanced.samples, other.samples, enhanced_needed + 1)) {
      return fail(pre.name(), "output up to sample " + std::to_string(enhanced_needed) +
                                  " changed when input beyond its declared lookahead "
                                  "was perturbed");
    }
  }

  // Feature stages, each against its own declared lookahead.
  std::vector<Matrix> rows;
  for (auto& s : parts.stages) {
    const Matrix base = run_stage(*s, enhanced.samples);
    std::vector<double> y = enhanced.samples;
    scramble_tail(y, frame_end + s->declared_future_samples() + 1, rng);
    const Matrix other = run_stage(*s, y);
    const std::size_t n = (frame + 1) * s->width();
    if (!std::equal(base.data.begin(), base.data.begin() + n, other.data.begin())) {
      return fail(s->name(), "frame " + std::to_string(frame) +
                                 " changed when input beyond its declared lookahead of " +
                                 std::to_string(s->declared_future_samples()) +
                                 " samples was perturbed");
    }
    rows.push_back(base);
  }

  // Generator: later conditioning frames must not reach earlier output.
  const ConditioningTrack cond = assemble_causal(rows[0], rows[1], rows[2], rows[3]);
  ConditioningTrack other = cond;
  for (std::size_t r = frame + 1; r < other.frames(); ++r) {
    for (double& v : other.frame_matrix.row(r)) v = 2.0 * rng.uniform() - 1.0;
    for (double& v : other.frame_identity.row(r)) v = 2.0 * rng.uniform() - 1.0;
  }
  const Waveform a = parts.generator->generate(cond, parts.z);
  const Waveform b = parts.generator->generate(other, parts.z);
  if (!same_prefix(a.samples, b.samples, (frame + 1) * kOutPerFrame)) {
    return fail("generator", "output of frame " + std::to_string(frame) +
                                 " changed when later frames were perturbed");
  }
  return result;
}

std::int64_t measure_horizon(StreamParts& parts, const Waveform& input,
                             std::size_t position, std::size_t count) {
  const Waveform base = offline_causal(parts, input);
  const std::vector<double> x = padded_samples(input);
  if (count == 0 || position + count > x.size()) {
    throw ArgumentError("horizon probe range exceeds the input");
  }
  std::int64_t horizon = INT64_MIN;
  for (std::size_t p = position; p < position + count; ++p) {
    std::vector<double> y = x;
    y[p] += y[p] > 0.0 ? -0.25 : 0.25;
    const Waveform out = offline_causal(parts, Waveform(y, kInputRateHz));
    const auto diff = std::mismatch(base.samples.begin(), base.samples.end(),
                                    out.samples.begin());
    if (diff.first == base.samples.end()) continue;
    const auto frame = static_cast<std::int64_t>(
        (diff.first - base.samples.begin()) / static_cast<std::ptrdiff_t>(kOutPerFrame));
    horizon = std::max(horizon, static_cast<std::int64_t>(p) -
                                    (frame * static_cast<std::int64_t>(kInputHop) +
                                     static_cast<std::int64_t>(kInputHop) - 1));
  }
  if (horizon == INT64_MIN) {
    throw NumericError("no perturbation changed the output; horizon is unobservable");
  }
  return horizon;
}

nlohmann::json RtfReport::to_json() const {
  return {{"rtf_median", median}, {"runs", runs}, {"audio_seconds", audio_seconds}};
}

RtfReport measure_rtf(const Waveform& input, const std::function<void()>& process,
                      int runs) {
  if (input.duration_s() < 5.0) {
    throw ArgumentError("RTF measurement needs at least 5 s of audio");
  }
  if (runs < 5) throw ArgumentError("RTF measurement needs at least 5 runs");
  RtfReport r;
  r.audio_seconds = input.duration_s();
  process();  // warmup
  for (int i = 0; i < runs; ++i) {
    const auto t0 = Clock::now();
    process();
    const std::chrono::duration<double> dt = Clock::now() - t0;
    r.runs.push_back(dt.count() / r.audio_seconds);
  }
  std::vector<double> sorted = r.runs;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  r.median = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  return r;
}

RtfReport measure_rtf(StreamingPipeline& pipeline, const Waveform& input, int runs) {
  return measure_rtf(input, [&] { pipeline.run(input); }, runs);
}

}  // namespace regen

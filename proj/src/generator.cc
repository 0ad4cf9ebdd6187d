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

#include "regen/generator.h"

#include <algorithm>
#include <map>

#include "regen/error.h"

namespace regen {

// ---- Config ------------------------------------------------------------------------

GeneratorConfig GeneratorConfig::Toy() {
  GeneratorConfig c;
  c.channel_widths = {32, 32, 32, 32, 32, 16, 16};
  c.cond_proj_dim = 32;
  return c;
}

int GeneratorConfig::total_upsample() const {
  int p = 1;
  for (int f : upsample_factors) p *= f;
  return p;
}

void GeneratorConfig::validate() const {
  auto positive = [](int v, const char* what) {
    if (v <= 0) {
      throw ArgumentError(std::string("generator ") + what +
                          " must be positive, got " + std::to_string(v));
    }
  };
  positive(content_dim, "content_dim");
  positive(kernel, "kernel");
  positive(z_dim, "z_dim");
  positive(id_dim, "id_dim");
  positive(cond_proj_dim, "cond_proj_dim");
  if (channel_widths.empty()) {
    throw ArgumentError("generator needs at least one block");
  }
  if (upsample_factors.size() != channel_widths.size()) {
    throw ArgumentError("generator has " + std::to_string(channel_widths.size()) +
                        " widths but " + std::to_string(upsample_factors.size()) +
                        " upsample factors");
  }
  for (int w : channel_widths) positive(w, "channel width");
  for (int f : upsample_factors) positive(f, "upsample factor");
  if (kernel % 2 == 0) {
    throw ArgumentError("generator kernel must be odd, got " + std::to_string(kernel));
  }
  if (dilations.size() != 4) {
    throw ArgumentError("generator blocks take four dilations, got " +
                        std::to_string(dilations.size()));
  }
  for (int d : dilations) positive(d, "dilation");
}

void GeneratorConfig::validate_for_pipeline() const {
  validate();
  if (channel_widths.size() != 7) {
    throw ArgumentError("the pipeline generator has 7 blocks, got " +
                        std::to_string(channel_widths.size()));
  }
  if (total_upsample() != kOutputHop) {
    throw ArgumentError("upsample factors must multiply to 96, got " +
                        std::to_string(total_upsample()));
  }
}

nlohmann::json GeneratorConfig::to_json() const {
  return {{"content_dim", content_dim},     {"channel_widths", channel_widths},
          {"upsample_factors", upsample_factors}, {"dilations", dilations},
          {"kernel", kernel},               {"z_dim", z_dim},
          {"id_dim", id_dim},               {"cond_proj_dim", cond_proj_dim},
          {"causal", causal},               {"spectral_norm", spectral_norm}};
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig c;
  try {
    c.content_dim = j.value("content_dim", c.content_dim);
    c.channel_widths = j.value("channel_widths", c.channel_widths);
    c.upsample_factors = j.value("upsample_factors", c.upsample_factors);
    c.dilations = j.value("dilations", c.dilations);
    c.kernel = j.value("kernel", c.kernel);
    c.z_dim = j.value("z_dim", c.z_dim);
    c.id_dim = j.value("id_dim", c.id_dim);
    c.cond_proj_dim = j.value("cond_proj_dim", c.cond_proj_dim);
    c.causal = j.value("causal", c.causal);
    c.spectral_norm = j.value("spectral_norm", c.spectral_norm);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("generator config: ") + e.what());
  }
  return c;
}

// ---- Receptive field -----------------------------------------------------------------

namespace {

struct Reach {
  std::int64_t left = 0;
  std::int64_t right = 0;
};

Reach conv_reach(const GeneratorConfig& c, int dilation) {
  const std::int64_t span = static_cast<std::int64_t>(dilation) * (c.kernel - 1);
  if (c.causal) return {span, 0};
  return {span / 2, span / 2};
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct Interval {
  std::int64_t lo, hi;
  void widen(Reach r) {
    lo -= r.left;
    hi += r.right;
  }
  void downsample(std::int64_t f) {
    lo = floor_div(lo, f);
    hi = floor_div(hi, f);
  }
};

void back_through_block(const GeneratorConfig& c, std::int64_t factor,
                        Interval& iv) {
  for (int i = 3; i >= 0; --i) iv.widen(conv_reach(c, c.dilations[i]));
  iv.downsample(factor);
}

}  // namespace

ReceptiveField receptive_field(const GeneratorConfig& config) {
  config.validate();
  ReceptiveField rf;
  constexpr std::int64_t kBase = 1 << 20;
  double rate = kFrameRateHz;
  for (std::size_t b = 0; b < config.num_blocks(); ++b) {
    const std::int64_t f = config.upsample_factors[b];
    BlockField field;
    for (std::int64_t p = 0; p < f; ++p) {
      Interval iv{kBase * f + p, kBase * f + p};
      back_through_block(config, f, iv);
      field.samples = std::max<std::size_t>(field.samples,
                                            static_cast<std::size_t>(iv.hi - iv.lo + 1));
    }
    field.rate_hz = rate;
    field.ms = 1000.0 * static_cast<double>(field.samples) / rate;
    rf.blocks.push_back(field);
    rate *= static_cast<double>(f);
  }
  const std::int64_t up = config.total_upsample();
  const Reach edge = conv_reach(config, 1);
  for (std::int64_t p = 0; p < up; ++p) {
    Interval iv{kBase * up + p, kBase * up + p};
    iv.widen(edge);  // output convolution
    for (std::size_t b = config.num_blocks(); b-- > 0;) {
      back_through_block(config, config.upsample_factors[b], iv);
    }
    iv.widen(edge);  // input convolution
    rf.frames = std::max<std::size_t>(rf.frames, static_cast<std::size_t>(iv.hi - iv.lo + 1));
    rf.past_frames = std::max<std::size_t>(rf.past_frames,
                                           static_cast<std::size_t>(kBase - iv.lo));
    rf.future_frames = std::max<std::size_t>(
        rf.future_frames, static_cast<std::size_t>(std::max<std::int64_t>(0, iv.hi - kBase)));
  }
  rf.ms = 1000.0 * static_cast<double>(rf.frames) / kFrameRateHz;
  rf.output_samples = rf.frames * static_cast<std::size_t>(up);
  return rf;
}

std::size_t count_parameters(const GeneratorConfig& c) {
  c.validate();
  const std::size_t k = c.kernel, p = c.cond_proj_dim;
  auto conv = [](std::size_t in, std::size_t out, std::size_t kernel) {
    return in * out * kernel + out;
  };
  auto cbn = [&](std::size_t ch) { return 2 * conv(p, ch, 1); };
  std::size_t n = conv(c.z_dim + c.id_dim, p, 1);
  n += conv(c.input_channels(), c.channel_widths[0], k);
  std::size_t in = c.channel_widths[0];
  for (int w : c.channel_widths) {
    const std::size_t out = w;
    n += cbn(in) + 3 * cbn(out);
    n += conv(in, out, k) + 3 * conv(out, out, k);
    if (in != out) n += conv(in, out, 1);
    in = out;
  }
  n += conv(in, 1, k);
  return n;
}

// ---- GBlock --------------------------------------------------------------------------

namespace {

nn::Conv1d make_conv(std::size_t in, std::size_t out, std::size_t kernel,
                     std::size_t dilation, const GeneratorConfig& c,
                     std::mt19937_64& rng) {
  nn::Conv1dSpec spec;
  spec.in_channels = in;
  spec.out_channels = out;
  spec.kernel = kernel;
  spec.dilation = dilation;
  spec.padding = c.causal ? nn::Padding::kCausal : nn::Padding::kSame;
  spec.spectral_norm = c.spectral_norm;
  return nn::Conv1d(spec, rng);
}

class PaddedConvs : public ConvContext {
 public:
  ad::Tensor apply(const nn::Conv1d& layer, const ad::Tensor& x) override {
    return layer.forward(x);
  }
};

}  // namespace

GBlock::GBlock(std::size_t in, std::size_t out, std::size_t factor,
               const GeneratorConfig& c, std::mt19937_64& rng)
    : factor_(factor), has_shortcut_(in != out) {
  const std::size_t k = c.kernel, p = c.cond_proj_dim;
  bn1_ = nn::CondBatchNorm(in, p, rng);
  conv1_ = make_conv(in, out, k, c.dilations[0], c, rng);
  bn2_ = nn::CondBatchNorm(out, p, rng);
  conv2_ = make_conv(out, out, k, c.dilations[1], c, rng);
  if (has_shortcut_) shortcut_ = make_conv(in, out, 1, 1, c, rng);
  bn3_ = nn::CondBatchNorm(out, p, rng);
  conv3_ = make_conv(out, out, k, c.dilations[2], c, rng);
  bn4_ = nn::CondBatchNorm(out, p, rng);
  conv4_ = make_conv(out, out, k, c.dilations[3], c, rng);
}

ad::Tensor GBlock::forward(const ad::Tensor& x, const ad::Tensor& cond,
                           bool training, ConvContext& convs) {
  ad::Tensor t = ad::relu(bn1_.forward(x, cond, training));
  t = convs.apply(conv1_, ad::upsample_nearest1d(t, factor_));
  t = ad::relu(bn2_.forward(t, cond, training));
  t = convs.apply(conv2_, t);
  ad::Tensor skip = ad::upsample_nearest1d(x, factor_);
  if (has_shortcut_) skip = convs.apply(shortcut_, skip);
  const ad::Tensor mid = ad::add(t, skip);
  t = ad::relu(bn3_.forward(mid, cond, training));
  t = convs.apply(conv3_, t);
  t = ad::relu(bn4_.forward(t, cond, training));
  t = convs.apply(conv4_, t);
  return ad::add(mid, t);
}

ad::Tensor GBlock::forward(const ad::Tensor& x, const ad::Tensor& cond,
                           bool training) {
  PaddedConvs convs;
  return forward(x, cond, training, convs);
}

void GBlock::collect(const std::string& prefix, nn::StateRegistry& reg) {
  bn1_.collect(prefix + "bn1.", reg);
  conv1_.collect(prefix + "conv1.", reg);
  bn2_.collect(prefix + "bn2.", reg);
  conv2_.collect(prefix + "conv2.", reg);
  if (has_shortcut_) shortcut_.collect(prefix + "shortcut.", reg);
  bn3_.collect(prefix + "bn3.", reg);
  conv3_.collect(prefix + "conv3.", reg);
  bn4_.collect(prefix + "bn4.", reg);
  conv4_.collect(prefix + "conv4.", reg);
}

void GBlock::power_iterate() {
  conv1_.power_iterate();
  conv2_.power_iterate();
  if (has_shortcut_) shortcut_.power_iterate();
  conv3_.power_iterate();
  conv4_.power_iterate();
}

std::vector<const nn::Conv1d*> GBlock::convs() const {
  std::vector<const nn::Conv1d*> out{&conv1_, &conv2_};
  if (has_shortcut_) out.push_back(&shortcut_);
  out.push_back(&conv3_);
  out.push_back(&conv4_);
  return out;
}

// ---- Generator -----------------------------------------------------------------------

Generator::Generator(const GeneratorConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  nn::Conv1dSpec proj{static_cast<std::size_t>(config_.z_dim + config_.id_dim),
                      static_cast<std::size_t>(config_.cond_proj_dim), 1};
  cond_proj_ = nn::Conv1d(proj, rng);
  const auto widths = config_.channel_widths;
  pre_ = make_conv(config_.input_channels(), widths[0], config_.kernel, 1,
                   config_, rng);
  std::size_t in = widths[0];
  blocks_.reserve(widths.size());
  for (std::size_t b = 0; b < widths.size(); ++b) {
    blocks_.emplace_back(in, widths[b], config_.upsample_factors[b], config_, rng);
    in = widths[b];
  }
  post_ = make_conv(in, 1, config_.kernel, 1, config_, rng);
}

ad::Tensor Generator::forward_impl(const ad::Tensor& frames,
                                   const ad::Tensor& zid, bool training,
                                   ConvContext& convs) {
  if (frames.rank() != 3 ||
      frames.dim(1) != static_cast<std::size_t>(config_.input_channels())) {
    throw ShapeError("generator expects frames [B, " +
                     std::to_string(config_.input_channels()) + ", F], got " +
                     ad::shape_str(frames.shape()));
  }
  if (zid.rank() != 3 ||
      zid.dim(1) != static_cast<std::size_t>(config_.z_dim + config_.id_dim) ||
      zid.dim(0) != frames.dim(0) || zid.dim(2) != frames.dim(2)) {
    throw ShapeError("generator conditioning " + ad::shape_str(zid.shape()) +
                     " does not match frames " + ad::shape_str(frames.shape()));
  }
  const ad::Tensor cond = cond_proj_.forward(zid);
  ad::Tensor h = convs.apply(pre_, frames);
  for (auto& block : blocks_) h = block.forward(h, cond, training, convs);
  h = convs.apply(post_, ad::relu(h));
  return ad::tanh(h);
}

ad::Tensor Generator::forward(const ad::Tensor& frames, const ad::Tensor& zid,
                              bool training) {
  PaddedConvs convs;
  return forward_impl(frames, zid, training, convs);
}

std::pair<ad::Tensor, ad::Tensor> Generator::make_inputs(
    const ConditioningTrack& cond, const std::vector<double>& z) const {
  const std::size_t d = config_.input_channels();
  if (cond.frame_matrix.cols != d) {
    throw ShapeError("conditioning has " + std::to_string(cond.frame_matrix.cols) +
                     " columns, generator expects " + std::to_string(d));
  }
  if (z.size() != static_cast<std::size_t>(config_.z_dim)) {
    throw ShapeError("z has " + std::to_string(z.size()) + " values, expected " +
                     std::to_string(config_.z_dim));
  }
  const std::size_t f = cond.frames();
  const std::size_t id = config_.id_dim;
  const bool per_frame = !cond.frame_identity.empty();
  if (per_frame ? cond.frame_identity.cols != id || cond.frame_identity.rows != f
                : cond.identity.values.size() != id) {
    throw ShapeError("identity does not match id_dim " + std::to_string(id));
  }
  std::vector<double> fv(d * f);
  for (std::size_t t = 0; t < f; ++t) {
    for (std::size_t c = 0; c < d; ++c) fv[c * f + t] = cond.frame_matrix.at(t, c);
  }
  const std::size_t zc = config_.z_dim + id;
  std::vector<double> zv(zc * f);
  for (std::size_t t = 0; t < f; ++t) {
    for (std::size_t c = 0; c < z.size(); ++c) zv[c * f + t] = z[c];
    for (std::size_t c = 0; c < id; ++c) {
      zv[(z.size() + c) * f + t] =
          per_frame ? cond.frame_identity.at(t, c) : cond.identity.values[c];
    }
  }
  return {ad::Tensor::from({1, d, f}, std::move(fv)),
          ad::Tensor::from({1, zc, f}, std::move(zv))};
}

Waveform Generator::generate(const ConditioningTrack& cond,
                             const std::vector<double>& z) {
  if (cond.frames() == 0) return Waveform({}, kOutputRateHz);
  const auto [frames, zid] = make_inputs(cond, z);
  ad::NoGradGuard no_grad;
  const ad::Tensor y = forward(frames, zid, /*training=*/false);
  return Waveform(y.values(), kFrameRateHz * config_.total_upsample());
}

void Generator::power_iterate() {
  pre_.power_iterate();
  for (auto& b : blocks_) b.power_iterate();
  post_.power_iterate();
}

nn::StateRegistry Generator::state() {
  nn::StateRegistry reg;
  cond_proj_.collect("g.cond_proj.", reg);
  pre_.collect("g.pre.", reg);
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].collect("g.block" + std::to_string(b) + ".", reg);
  }
  post_.collect("g.post.", reg);
  return reg;
}

std::size_t Generator::num_parameters() { return state().num_parameters(); }

std::vector<const nn::Conv1d*> Generator::all_convs() const {
  std::vector<const nn::Conv1d*> out{&pre_};
  for (const auto& b : blocks_) {
    const auto c = b.convs();
    out.insert(out.end(), c.begin(), c.end());
  }
  out.push_back(&post_);
  return out;
}

std::unique_ptr<GeneratorStream> Generator::open_stream(
    std::vector<double> z, std::vector<double> identity) {
  if (!config_.causal) {
    throw ModeError("streaming needs a causal generator configuration");
  }
  return std::make_unique<GeneratorStream>(this, std::move(z), std::move(identity));
}

// ---- Streaming -------------------------------------------------------------------------

// Causal convolution over [history | chunk] without padding. The history
// starts as zeros, which is exactly the left padding of the whole-signal path.
class GeneratorStream::Cache : public ConvContext {
 public:
  explicit Cache(const std::vector<const nn::Conv1d*>& convs) {
    for (const nn::Conv1d* c : convs) {
      Entry e;
      e.weight = c->effective_weight();
      e.history = ad::Tensor::zeros({1, c->spec().in_channels, c->spec().history()});
      entries_.emplace(c, std::move(e));
    }
  }

  ad::Tensor apply(const nn::Conv1d& layer, const ad::Tensor& x) override {
    Entry& e = entries_.at(&layer);
    const std::size_t h = layer.spec().history();
    const ad::Conv1dOptions opt{1, layer.spec().dilation, 0, 0};
    if (h == 0) return layer.forward_with(x, e.weight, opt);
    const ad::Tensor full = ad::concat_time(e.history, x);
    e.history = ad::slice_time(full, full.dim(2) - h, h);
    return layer.forward_with(full, e.weight, opt);
  }

 private:
  struct Entry {
    ad::Tensor weight;
    ad::Tensor history;
  };
  std::map<const nn::Conv1d*, Entry> entries_;
};

GeneratorStream::GeneratorStream(Generator* gen, std::vector<double> z,
                                 std::vector<double> identity)
    : gen_(gen), z_(std::move(z)), identity_(std::move(identity)) {
  const auto& c = gen_->config();
  if (z_.size() != static_cast<std::size_t>(c.z_dim)) {
    throw ShapeError("z does not match z_dim");
  }
  if (!identity_.empty() && identity_.size() != static_cast<std::size_t>(c.id_dim)) {
    throw ShapeError("identity does not match id_dim");
  }
  reset();
}

void GeneratorStream::reset() {
  ad::NoGradGuard no_grad;
  cache_ = std::make_shared<Cache>(gen_->all_convs());
}

std::vector<double> GeneratorStream::push(const Matrix& frames,
                                          const Matrix& identity_rows) {
  if (frames.rows == 0) return {};
  ConditioningTrack track;
  track.frame_matrix = frames;
  if (!identity_rows.empty()) {
    track.frame_identity = identity_rows;
  } else {
    track.identity.values = identity_;
  }
  const auto [f, zid] = gen_->make_inputs(track, z_);
  ad::NoGradGuard no_grad;
  const ad::Tensor y = gen_->forward_impl(f, zid, /*training=*/false, *cache_);
  return y.values();
}

}  // namespace regen

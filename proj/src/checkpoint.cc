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


#include "regen/checkpoint.h"

#include <algorithm>
#include <map>

#include "bytes.h"
#include "regen/audio_io.h"
#include "regen/error.h"

namespace regen {
namespace {

constexpr char kMagic[] = "RGNC";
constexpr std::uint32_t kDtypeF32 = 0;

}  // namespace

const CheckpointTensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  bytes::Writer w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.str(ckpt.metadata.dump());
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  std::uint64_t offset = 0;
  for (const auto& t : ckpt.tensors) {
    if (ad::shape_numel(t.shape) != t.data.size()) {
      throw ShapeError("checkpoint tensor " + t.name + " has " +
                       std::to_string(t.data.size()) + " values for shape " +
                       ad::shape_str(t.shape));
    }
    w.str(t.name);
    w.u32(kDtypeF32);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) w.u64(d);
    w.u64(offset);
    offset += 4 * t.data.size();
  }
  for (const auto& t : ckpt.tensors) {
    for (float v : t.data) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return std::move(w.data());
}

Checkpoint decode_checkpoint(std::span<const unsigned char> in) {
  bytes::Reader r(in, "checkpoint");
  if (r.raw(4) != std::string_view(kMagic, 4)) {
    throw ParseError("not an RGNC checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatVersionError("checkpoint version " + std::to_string(version) +
                             " is not supported (expected " +
                             std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ckpt;
  try {
    ckpt.metadata = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint metadata: ") + e.what());
  }
  const std::uint32_t count = r.u32();
  struct Entry {
    std::uint64_t offset;
    std::size_t numel;
  };
  std::vector<Entry> entries;
  // Each entry takes at least 20 bytes, which bounds `count` before allocating.
  if (static_cast<std::size_t>(count) * 20 > r.remaining()) {
    throw ParseError("checkpoint: tensor table truncated");
  }
  std::map<std::string, int> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.str();
    if (seen[t.name]++) throw ParseError("checkpoint: duplicate tensor " + t.name);
    if (r.u32() != kDtypeF32) throw ParseError("checkpoint: unknown dtype for " + t.name);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw ParseError("checkpoint: bad rank for " + t.name);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = r.u64();
      if (dim > (std::uint64_t{1} << 40) || (dim && numel > (std::uint64_t{1} << 40) / dim)) {
        throw ParseError("checkpoint: implausible shape for " + t.name);
      }
      t.shape.push_back(dim);
      numel *= dim;
    }
    entries.push_back({r.u64(), numel});
    ckpt.tensors.push_back(std::move(t));
  }
  const std::size_t data_start = r.pos();
  const std::size_t data_size = r.remaining();
  std::uint64_t expected = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].offset != expected) {
      throw ParseError("checkpoint: tensor " + ckpt.tensors[i].name +
                       " has an inconsistent offset");
    }
    expected += 4 * entries[i].numel;
  }
  if (expected != data_size) {
    throw ParseError("checkpoint: data section has " + std::to_string(data_size) +
                     " bytes, table describes " + std::to_string(expected));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    r.seek(data_start + entries[i].offset);
    auto& data = ckpt.tensors[i].data;
    data.resize(entries[i].numel);
    for (auto& v : data) v = std::bit_cast<float>(r.u32());
  }
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_checkpoint(bytes);
}

void export_state(const nn::StateRegistry& reg, Checkpoint& ckpt) {
  auto add = [&](const std::string& name, const ad::Shape& shape,
                 const std::vector<double>& values) {
    CheckpointTensor t{name, shape, {}};
    t.data.reserve(values.size());
    for (double v : values) t.data.push_back(static_cast<float>(v));
    ckpt.tensors.push_back(std::move(t));
  };
  for (const auto& p : reg.params) add(p.name, p.tensor.shape(), p.tensor.values());
  for (const auto& b : reg.buffers) add(b.name, b.shape, *b.data);
}

void import_state(const Checkpoint& ckpt, nn::StateRegistry& reg) {
  auto lookup = [&](const std::string& name, const ad::Shape& shape) {
    const CheckpointTensor* t = ckpt.find(name);
    if (!t) throw ParseError("checkpoint is missing tensor " + name);
    if (t->shape != shape) {
      throw ParseError("checkpoint tensor " + name + " has shape " +
                       ad::shape_str(t->shape) + ", expected " + ad::shape_str(shape));
    }
    return t;
  };
  // Validate everything before touching any state.
  for (const auto& p : reg.params) lookup(p.name, p.tensor.shape());
  for (const auto& b : reg.buffers) lookup(b.name, b.shape);
  auto copy = [](const CheckpointTensor* t, std::vector<double>& dst) {
    dst.assign(t->data.begin(), t->data.end());
  };
  for (auto& p : reg.params) {
    auto& dst = p.tensor.mutable_values();
    copy(lookup(p.name, p.tensor.shape()), dst);
  }
  for (auto& b : reg.buffers) copy(lookup(b.name, b.shape), *b.data);
}

}  // namespace regen

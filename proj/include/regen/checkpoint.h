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


// "RGNC" named-tensor container:
//
//   "RGNC" | u32 version | u32 n + n bytes JSON metadata
//   | u32 count | count x (name, u32 dtype, u32 rank, u64 dims..., u64 offset)
//   | float32 data
//
// All integers little-endian; offsets are relative to the start of the data
// section. Decoding validates the whole file before returning anything.

#ifndef REGEN_CHECKPOINT_H_
#define REGEN_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "regen/nn.h"
#include "regen/tensor.h"

namespace regen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  ad::Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<CheckpointTensor> tensors;

  const CheckpointTensor* find(const std::string& name) const;
};

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
// Throws ParseError on a bad magic, truncation, or inconsistent table, and
// FormatVersionError on an unknown version.
Checkpoint decode_checkpoint(std::span<const unsigned char> bytes);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// Appends every parameter and buffer of `reg` to `ckpt`.
void export_state(const nn::StateRegistry& reg, Checkpoint& ckpt);
// Copies tensors into `reg` by name. Every entry of `reg` must be present
// with a matching shape (ParseError); nothing is written unless all are.
void import_state(const Checkpoint& ckpt, nn::StateRegistry& reg);

}  // namespace regen

#endif  // REGEN_CHECKPOINT_H_

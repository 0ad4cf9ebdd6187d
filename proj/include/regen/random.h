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


// Portable seeded randomness. Normal draws use Box-Muller directly on the
// engine output, so sequences are identical across standard libraries and
// the whole generator state round-trips through a string.

#ifndef REGEN_RANDOM_H_
#define REGEN_RANDOM_H_

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace regen {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();
  std::vector<double> normal_vector(std::size_t n);

  std::string serialize() const;
  // Throws ParseError on a malformed state string.
  static Rng deserialize(const std::string& state);

  std::mt19937_64& engine() { return engine_; }
  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace regen

#endif  // REGEN_RANDOM_H_

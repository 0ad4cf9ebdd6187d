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


// Central finite-difference checks of every differentiable op and every
// training loss against reverse-mode gradients.

#ifndef REGEN_GRAD_SUITE_H_
#define REGEN_GRAD_SUITE_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace regen {

struct GradCase {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // coordinates compared
  std::size_t skipped = 0;  // coordinates the differences could not resolve
};

struct GradSuiteResult {
  std::vector<GradCase> cases;  // worst error per case over all trials
  int trials = 0;
  double max_rel_error() const;
  std::size_t checked() const;
  std::size_t skipped() const;
};

// Runs each case `trials` times with inputs drawn from seeds derived from
// `seed`.
GradSuiteResult run_gradient_suite(std::uint64_t seed, int trials = 1);

}  // namespace regen

#endif  // REGEN_GRAD_SUITE_H_

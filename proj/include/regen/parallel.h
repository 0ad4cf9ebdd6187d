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

#ifndef REGEN_PARALLEL_H_
#define REGEN_PARALLEL_H_

#include <functional>
#include <vector>

namespace regen {

// Worker count from REGEN_NUM_THREADS, at least 1. Unset means 1.
int configured_threads();

// Runs `tasks` with at most `threads` in flight. The first exception (in task
// order) is rethrown after every task has finished.
void run_parallel(const std::vector<std::function<void()>>& tasks,
                  int threads);

}  // namespace regen

#endif  // REGEN_PARALLEL_H_

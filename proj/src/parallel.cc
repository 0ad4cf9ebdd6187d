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

#include "regen/parallel.h"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <future>
#include <string>

namespace regen {

int configured_threads() {
  const char* env = std::getenv("REGEN_NUM_THREADS");
  if (env == nullptr) return 1;
  try {
    return std::max(1, std::stoi(env));
  } catch (const std::exception&) {
    return 1;
  }
}

void run_parallel(const std::vector<std::function<void()>>& tasks,
                  int threads) {
  std::vector<std::exception_ptr> errors(tasks.size());
  auto guarded = [&](std::size_t i) {
    try {
      tasks[i]();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1 || tasks.size() <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) guarded(i);
  } else {
    const std::size_t width = static_cast<std::size_t>(threads);
    for (std::size_t begin = 0; begin < tasks.size(); begin += width) {
      const std::size_t end = std::min(tasks.size(), begin + width);
      std::vector<std::future<void>> running;
      for (std::size_t i = begin; i < end; ++i) {
        running.push_back(std::async(std::launch::async, guarded, i));
      }
      for (auto& f : running) f.get();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace regen

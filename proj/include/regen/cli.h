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


// Command-line front end. Exit codes: 0 success, 1 usage error, 2 processing
// error.

#ifndef REGEN_CLI_H_
#define REGEN_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace regen {

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace regen

#endif  // REGEN_CLI_H_

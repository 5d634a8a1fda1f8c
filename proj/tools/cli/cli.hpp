// Copyright 2026 The hazepark Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// The `hazepark` command-line tool as a callable library, so tests can drive
// it in-process.

#ifndef HAZEPARK_TOOLS_CLI_HPP_
#define HAZEPARK_TOOLS_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace hazepark::cli {

/// Exit codes. Stable for scripting.
enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kConfigOrFile = 3,
  kData = 4,
  kInternal = 5,
};

/// Runs one invocation. `args` excludes the program name. Failures print a
/// single `error: <category>: <message>` line to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses a value list: "lo:hi:step" (inclusive) or "a,b,c". Throws
/// ConfigError on malformed input.
std::vector<double> parse_value_list(const std::string& text, const std::string& what);

int main(int argc, char** argv);

}  // namespace hazepark::cli

#endif  // HAZEPARK_TOOLS_CLI_HPP_

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

#include "hazepark/error.hpp"

namespace hazepark {

std::string_view to_string(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kShape: return "shape";
    case ErrorCategory::kRange: return "range";
    case ErrorCategory::kDomain: return "domain";
    case ErrorCategory::kDecode: return "decode";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kInput: return "input";
    case ErrorCategory::kMask: return "mask";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kState: return "state";
    case ErrorCategory::kIo: return "io";
  }
  return "unknown";
}

}  // namespace hazepark

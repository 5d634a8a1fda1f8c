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

#ifndef HAZEPARK_ERROR_HPP_
#define HAZEPARK_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace hazepark {

/// Coarse error families. The CLI maps these onto its exit codes.
enum class ErrorCategory {
  kShape,
  kRange,
  kDomain,
  kDecode,
  kConfig,
  kData,
  kInput,
  kMask,
  kFormat,
  kState,
  kIo,
};

std::string_view to_string(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

#define HAZEPARK_DEFINE_ERROR(Name, Category)                              \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& what) : Error(Category, what) {}      \
  };

HAZEPARK_DEFINE_ERROR(ShapeError, ErrorCategory::kShape)
HAZEPARK_DEFINE_ERROR(RangeError, ErrorCategory::kRange)
HAZEPARK_DEFINE_ERROR(DomainError, ErrorCategory::kDomain)
HAZEPARK_DEFINE_ERROR(DecodeError, ErrorCategory::kDecode)
HAZEPARK_DEFINE_ERROR(ConfigError, ErrorCategory::kConfig)
HAZEPARK_DEFINE_ERROR(DataError, ErrorCategory::kData)
HAZEPARK_DEFINE_ERROR(InputError, ErrorCategory::kInput)
HAZEPARK_DEFINE_ERROR(MaskError, ErrorCategory::kMask)
HAZEPARK_DEFINE_ERROR(FormatError, ErrorCategory::kFormat)
HAZEPARK_DEFINE_ERROR(StateError, ErrorCategory::kState)
HAZEPARK_DEFINE_ERROR(IoError, ErrorCategory::kIo)

#undef HAZEPARK_DEFINE_ERROR

}  // namespace hazepark

#endif  // HAZEPARK_ERROR_HPP_

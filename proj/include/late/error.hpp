// Copyright 2026 The latesearch Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <exception>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace late {

enum class ErrorKind {
    InvalidArgument,
    DimensionMismatch,
    EmptyDocument,
    NonFinite,
    MalformedFile,
    ChecksumMismatch,
    VersionMismatch,
    DuplicateOrdinal,
    Untrained,
    Io,
    Data,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (notably the
/// CLI) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& what)
            : std::runtime_error(std::string(to_string(kind)) + ": " + what),
              kind_(kind) {}

    ErrorKind kind() const noexcept {
        return kind_;
    }

  private:
    ErrorKind kind_;
};

#define LATE_THROW(kind, msg) throw ::late::Error(::late::ErrorKind::kind, (msg))

#define LATE_REQUIRE(cond, kind, msg) \
    do {                              \
        if (!(cond)) {                \
            LATE_THROW(kind, msg);    \
        }                             \
    } while (0)

/// Rethrows the first captured exception, if any. Used after parallel loops,
/// which must not let exceptions escape a worker.
inline void rethrow_first(const std::vector<std::exception_ptr>& errors) {
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace late

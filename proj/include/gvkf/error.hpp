// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gvkf {

enum class ErrorKind {
    InvalidParameter,
    SingularCovariance,
    InvalidRay,
    EmptyInput,
    MissingCamera,
    InvalidId,
    SolverFailure,
    IndexOutOfRange,
    ShapeMismatch,
    InvalidBounds,
    FileError,
    ParseError,
    NumericFailure,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit code without string matching.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

} // namespace gvkf

// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace gvkf {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumeric = 3;

/// Runs the command line. `args` excludes the program name. Errors are
/// reported on `err` as a single line starting with "error:".
int run_cli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

} // namespace gvkf

// Copyright Contributors to the gvkf project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gvkf {

struct PropertyResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 42;
    unsigned threads = 1;
    /// Feeds one property a deliberately wrong reference so it must fail.
    bool negate = false;
};

/// Runs the built-in invariant suite on small randomized inputs.
std::vector<PropertyResult> run_verification(const VerifyOptions &opts = {});

} // namespace gvkf

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace supernas {

// Tensor dimension mismatch or malformed shape.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad argument value: out-of-range label, invalid encoding, invalid stage, ...
struct ValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration file problems (unknown key, type mismatch, invalid option list).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File and serialization problems, including checksum/version failures.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failure: NaN loss, non-finite gradient, zero-variance correlation.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A required input artifact (checkpoint, table) does not exist.
struct MissingArtifact : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Mode { train, eval };

}  // namespace supernas

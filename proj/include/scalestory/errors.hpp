// Copyright (C) 2026 The scalestory Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace scalestory {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operation invoked out of order (wrong step, double application).
struct StateError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Zero-norm input where a ratio or cosine is required.
struct DegenerateError : std::domain_error {
    using std::domain_error::domain_error;
};

/// An unconditional-branch injection found no recorded weight to reuse.
struct SynchronizationError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Output that should be reproducible across batches was not.
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace scalestory

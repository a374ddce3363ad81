// Copyright (c) the matkit authors
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <stdexcept>
#include <string>

namespace matkit {

/// Base class of all recoverable toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct PreconditionError : Error { using Error::Error; };
struct BackendError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct ConflictError : Error { using Error::Error; };
struct MappingError : Error { using Error::Error; };
struct InsufficientDataError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };

} // namespace matkit

// Copyright 2026 The uniecs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace uniecs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that cannot be combined; the message names the node.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or inconsistent data file or record.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf, divergence, zero-norm vectors and failed gradient checks.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace uniecs

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The clpolyp Authors

#pragma once

#include <stdexcept>
#include <string>

namespace clpolyp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, decoded or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (binary masks, sizes, ranges).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Bad configuration value or unknown key / preset name.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN / Inf / zero-norm encountered where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Negative sampling could not satisfy the category constraint.
class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace clpolyp

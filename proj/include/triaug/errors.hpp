// Copyright 2026 The TriAug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace triaug {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input has no well-defined result, e.g. normalizing a zero vector.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// A value became NaN/Inf, or a matrix could not be factored.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of a differentiation graph (second backward, foreign variable, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace triaug

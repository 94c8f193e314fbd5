#pragma once

#include <stdexcept>
#include <string>

namespace fcurve {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes: InputError family -> 2, everything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user-provided input: files, configs, model documents.
class InputError : public Error {
 public:
  using Error::Error;
};

// Malformed delimited text (missing header, unknown or missing column).
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

// Filtering or loading produced nothing to work with.
class NoDataError : public InputError {
 public:
  using InputError::InputError;
};

class ConfigError : public InputError {
 public:
  using InputError::InputError;
};

// Shapes or orderings that do not line up (model vs extractor, W1 vs x).
class StructuralError : public InputError {
 public:
  using InputError::InputError;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace fcurve

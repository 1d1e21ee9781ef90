#pragma once

#include <stdexcept>
#include <string>

namespace attnrec {

// Bad user input: config keys, CLI usage, violated preconditions.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unusable data files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf in parameters, gradients or losses.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace attnrec

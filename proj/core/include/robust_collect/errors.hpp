#pragma once

#include <stdexcept>
#include <string>

namespace robust_collect {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid arguments or violated preconditions of a library operation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent configuration / snapshot / dataset files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A behavior policy produced non-finite or exploding parameters.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace robust_collect

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace convbf {

/// Bad arguments: dimension mismatch, out-of-range parameter, invalid spec.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A factorization failed or a quantity became non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unsupported combination of filter, model and parameters.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// All particle weights collapsed to zero.
class DegeneracyError : public NumericalError {
 public:
  DegeneracyError(std::size_t step, const std::string& what)
      : NumericalError("weight degeneracy at step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& path, const std::string& what = "I/O failure")
      : std::runtime_error(what + ": " + path), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace convbf

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hsicx {

/// Precondition violated by a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A model endpoint failed to produce outputs for a chunk of inputs.
class TransportError : public std::runtime_error {
 public:
  TransportError(std::size_t chunk, const std::string& what)
      : std::runtime_error("chunk " + std::to_string(chunk) + ": " + what), chunk_(chunk) {}

  std::size_t chunk() const noexcept { return chunk_; }

 private:
  std::size_t chunk_;
};

/// A correlation was requested on a sample with zero variance.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// File could not be read, written or decoded.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hsicx

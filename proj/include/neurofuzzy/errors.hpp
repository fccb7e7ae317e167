#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid shapes, strides, layer descriptions or hyper-parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Data that is well-formed but semantically invalid (e.g. label out of range).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

/// API misuse, e.g. calling backward() on a non-scalar tensor.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace nf

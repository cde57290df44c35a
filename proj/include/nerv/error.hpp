#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nerv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A configuration value violates its contract (bad hyperparameter, bad
/// upscale product, empty loss term set, ...).
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Tensor/image shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the function (timestamp outside
/// (0,1], frame index out of range, epoch out of range).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable (non-finite values, empty sequences, mixed
/// frame resolutions).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// The byte stream does not start with the artifact magic.
class NotNervFile : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

/// Truncated or internally inconsistent artifact. Carries the byte offset at
/// which parsing failed.
class CorruptStream : public Error {
 public:
  CorruptStream(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace nerv

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace slcnn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or layer dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A configuration violates an architectural invariant.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (datasets, embeddings, grid files, checkpoints).
class FormatError : public Error {
 public:
  using Error::Error;
};

// A single malformed dataset record. `line()` is 1-based.
class RecordError : public FormatError {
 public:
  RecordError(std::size_t line, const std::string& what)
      : FormatError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Training diverged; the message names the epoch, batch and parameter block.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace slcnn

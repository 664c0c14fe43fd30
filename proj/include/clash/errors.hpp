#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clash {

// Malformed input data (PGM streams, .dstf files, checkpoints, configs).
// Carries the byte offset at which parsing failed where that is meaningful.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t byte_offset)
      : std::runtime_error(what + " (byte " + std::to_string(byte_offset) + ")"),
        byte_offset_(byte_offset) {}
  explicit FormatError(const std::string& what)
      : std::runtime_error(what), byte_offset_(0) {}
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// A frame with no boundary pixels; the distance transform is undefined.
class EmptyBoundaryError : public std::runtime_error {
 public:
  explicit EmptyBoundaryError(const std::string& what) : std::runtime_error(what) {}
};

// Caller broke an API contract (shape mismatch, bad argument).
class ContractError : public std::invalid_argument {
 public:
  explicit ContractError(const std::string& what) : std::invalid_argument(what) {}
};

// Non-finite values where finite math is required (loss blowup, bad data).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace clash

#pragma once

#include <stdexcept>
#include <string>

namespace stavc {

// Base for all library errors. Subclasses map to CLI exit codes:
// UsageError -> 2, DataError -> 3, CodecError -> 4, anything else -> 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor shape / dimension mismatch.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension error: " + what) {}
};

// NaN/Inf produced, division by near-zero, etc.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric error: " + what) {}
};

// API misuse (wrong argument combinations, config mismatch).
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error("usage error: " + what) {}
};

// Ingestion / file-format problems on input data.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data error: " + what) {}
};

// Entropy-coding and bitstream failures, including encoder/decoder
// reconstruction desync.
class CodecError : public Error {
 public:
  explicit CodecError(const std::string& what) : Error("codec error: " + what) {}
};

}  // namespace stavc

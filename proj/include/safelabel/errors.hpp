#pragma once

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace safelabel {

// Base class for every error raised by the library. The CLI maps these to
// exit code 1; configuration problems map to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownColor : public Error {
 public:
  UnknownColor(std::uint32_t rgb, std::size_t row, std::size_t col)
      : Error(format(rgb, row, col)), color(rgb), row(row), col(col) {}

  std::uint32_t color;
  std::size_t row;
  std::size_t col;

 private:
  static std::string format(std::uint32_t rgb, std::size_t row, std::size_t col) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "unknown palette color #%06X at (row %zu, col %zu)",
                  static_cast<unsigned>(rgb & 0xFFFFFFu), row, col);
    return buf;
  }
};

class InvalidClass : public Error {
 public:
  using Error::Error;
};

class DegenerateBlob : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error("dataset is empty: no transitions") {}
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class NonMonotonicTimestamps : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  LengthMismatch(std::size_t a, std::size_t b)
      : Error("label length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised for malformed or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace safelabel

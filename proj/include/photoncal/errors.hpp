#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace photoncal {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (mismatched grids or dimensions, N < 2, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A requested value lies outside the domain covered by the data.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file content. The message always names the file
/// and the byte offset or row where decoding stopped.
class FormatError : public Error {
 public:
  FormatError(const std::string& path, const std::string& where, const std::string& what)
      : Error(path + ": " + where + ": " + what) {}

  static FormatError at_offset(const std::string& path, std::uint64_t offset, const std::string& what) {
    return FormatError(path, "offset " + std::to_string(offset), what);
  }
  static FormatError at_row(const std::string& path, std::size_t row, const std::string& what) {
    return FormatError(path, "row " + std::to_string(row), what);
  }
};

/// Calibration data is present and well formed but too degraded to use.
class QualityError : public Error {
 public:
  using Error::Error;
};

}  // namespace photoncal

#pragma once

#include <stdexcept>
#include <string>

namespace dactx {

// Exit-code taxonomy shared by the library and the CLI:
// 0 success, 2 config, 3 io, 4 data format, 5 numeric.
class Error : public std::runtime_error {
 public:
  Error(int exit_code, const std::string& what)
      : std::runtime_error(what), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& w) : Error(2, w) {}
};

// Dimension/shape violations are usage errors; they map to the config code.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& w) : Error(2, w) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& w) : Error(3, w) {}
};

class DataFormatError : public Error {
 public:
  explicit DataFormatError(const std::string& w) : Error(4, w) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& w) : Error(5, w) {}
};

}  // namespace dactx

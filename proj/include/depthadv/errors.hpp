#pragma once

#include <stdexcept>
#include <string>

namespace depthadv {

// Error taxonomy shared by the whole library. Everything derives from
// std::runtime_error so callers may catch coarsely or precisely.

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error("ShapeError: " + msg) {}
};

struct NumericsError : std::runtime_error {
  explicit NumericsError(const std::string& msg) : std::runtime_error("NumericsError: " + msg) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("ConfigError: " + msg) {}
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error("DataError: " + msg) {}
};

struct IOError : std::runtime_error {
  explicit IOError(const std::string& msg) : std::runtime_error("IOError: " + msg) {}
};

}  // namespace depthadv

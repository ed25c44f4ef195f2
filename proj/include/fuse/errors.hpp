#pragma once

#include <stdexcept>
#include <string>

namespace fuse {

// Thrown when the S^2 chart between two gravity directions is undefined
// (antipodal directions have no unique connecting geodesic).
class DegenerateChartError : public std::runtime_error {
 public:
  explicit DegenerateChartError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite or otherwise unusable numerics inside an estimator update.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Iterated update whose step norm keeps growing.
class DivergedError : public std::runtime_error {
 public:
  explicit DivergedError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file; carries the 1-based line (text) or byte offset (binary).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t location)
      : std::runtime_error(what + " (at " + std::to_string(location) + ")"),
        location_(location) {}
  std::size_t location() const { return location_; }

 private:
  std::size_t location_;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fuse

#pragma once
#include <stdexcept>
#include <string>

namespace qlm {

// Error taxonomy mirrored by the C API / CLI exit codes.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& m) : std::runtime_error(m) {}
};
struct GeometryError : std::runtime_error {
  explicit GeometryError(const std::string& m) : std::runtime_error(m) {}
};
struct ConvergenceError : std::runtime_error {
  explicit ConvergenceError(const std::string& m) : std::runtime_error(m) {}
};
struct AdmissibilityError : std::runtime_error {
  explicit AdmissibilityError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace qlm

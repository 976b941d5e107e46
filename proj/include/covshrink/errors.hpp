#pragma once

#include <stdexcept>
#include <string>

namespace covshrink {

// Iterative or quadrature routine failed to reach its target accuracy.
// The message carries the last residual so callers can log diagnostics.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Config file could not be parsed or validated; the message includes the
// offending line number where one is known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace covshrink

#pragma once

#include <stdexcept>
#include <string>

namespace bsfilter {

// Invalid or inconsistent experiment configuration. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Fatal numerical failure (non-finite field values, non-positive normalizer, ...).
// CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bsfilter

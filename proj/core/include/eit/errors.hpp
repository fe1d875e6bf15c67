#pragma once

#include <stdexcept>
#include <string>

namespace eit {

// Invalid experiment configuration (bad key, violated constraint).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Factorization failure or a conditioning guard tripped.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace eit

#ifndef MFA_ERRORS_HPP
#define MFA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace mfa {

// Error taxonomy mirrored by the CLI exit codes: config -> 2, data -> 3,
// numerical -> 4.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : ConfigError {
  using ConfigError::ConfigError;
};

}  // namespace mfa

#endif

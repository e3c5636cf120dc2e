#ifndef ESMETA_ERRORS_HPP_
#define ESMETA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace esmeta {

// Precondition violated by the caller (bad dimension, empty list, ...).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation called on an object that cannot serve it yet (e.g. a replay
// buffer smaller than the batch size).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A non-finite value showed up in a gradient or update.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-range configuration value. key() names the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace esmeta

#endif  // ESMETA_ERRORS_HPP_

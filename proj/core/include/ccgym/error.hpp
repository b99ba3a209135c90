#pragma once

#include <stdexcept>
#include <string>

namespace ccgym {

/// Invalid experiment, topology, or environment configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Unknown host, port, or route.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Caller violated an operation precondition (bad shape, bad value).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Lifecycle misuse or an internal inconsistency detected at runtime.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Filesystem failure; the message carries the offending path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ccgym

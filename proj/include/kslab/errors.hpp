#pragma once

#include <stdexcept>
#include <string>

namespace kslab {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid configuration or violated precondition on user-supplied input.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Input outside the mathematical domain of an operation (e.g. negative density).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Non-finite values produced by a solve.
class NumericalBreakdown : public Error {
 public:
  explicit NumericalBreakdown(const std::string& msg) : Error(msg) {}
};

/// Requested combination is outside what the lab supports.
class Unsupported : public Error {
 public:
  explicit Unsupported(const std::string& msg) : Error(msg) {}
};

}  // namespace kslab

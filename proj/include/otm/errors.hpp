#pragma once

#include <stdexcept>
#include <string>

namespace otm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// An iterative solve stopped before reaching its tolerance.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string &what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// A trajectory left the guard ball of the reference integrator.
class BlowUpError : public Error {
public:
  using Error::Error;
};

/// The time span exceeds the admissible horizon of the model.
class HorizonError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace otm

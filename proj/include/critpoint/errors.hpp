#pragma once

#include <stdexcept>
#include <string>

namespace critpoint {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input, unsupported parameter range, or a model that cannot serve the request.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A computation ran but did not reach its accuracy contract.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, double estimate = 0.0, double bound = 0.0)
      : Error(what), estimate_(estimate), bound_(bound) {}
  double estimate() const { return estimate_; }
  double bound() const { return bound_; }

 private:
  double estimate_;
  double bound_;
};

}  // namespace critpoint

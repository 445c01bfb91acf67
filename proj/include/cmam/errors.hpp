#pragma once

#include <stdexcept>
#include <string>

namespace cmam {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Diffusion tensor (or Gram matrix of normals in its metric) is not SPD.
class MetricDegenerateError : public Error {
 public:
  using Error::Error;
};

/// Constraint gradients are rank deficient at the evaluation point.
class DegenerateConstraintsError : public Error {
 public:
  using Error::Error;
};

/// A vector handed to the generalized inverse is not tangent.
class DomainError : public Error {
 public:
  using Error::Error;
};

class RetractionError : public Error {
 public:
  using Error::Error;
};

class InfeasiblePathError : public Error {
 public:
  using Error::Error;
};

/// The curve tangent vanishes, so the time change cannot be formed.
class DegenerateParametrizationError : public Error {
 public:
  using Error::Error;
};

/// Two consecutive waypoints are antipodal on some sphere factor.
class AmbiguousGeodesicError : public Error {
 public:
  using Error::Error;
};

class InvalidModelError : public Error {
 public:
  using Error::Error;
};

class InvalidRouteError : public Error {
 public:
  using Error::Error;
};

/// A tangent eigenvalue sits too close to the imaginary axis to classify.
class MarginalStabilityError : public Error {
 public:
  using Error::Error;
};

/// Every route of a multistart (or every route at a sweep point) failed.
class AllRoutesFailedError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmam

#pragma once

#include <stdexcept>
#include <string>

namespace spdo {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPDO_DEFINE_ERROR(Name)              \
  class Name : public Error {                \
   public:                                   \
    using Error::Error;                      \
  };

SPDO_DEFINE_ERROR(ParameterError)
SPDO_DEFINE_ERROR(RepresentationError)
SPDO_DEFINE_ERROR(UndefinedExponentError)
SPDO_DEFINE_ERROR(DerivativeAccuracyError)
SPDO_DEFINE_ERROR(SingularKernelError)
SPDO_DEFINE_ERROR(RegularizationWarning)
SPDO_DEFINE_ERROR(EllipticityError)
SPDO_DEFINE_ERROR(HypothesisError)
SPDO_DEFINE_ERROR(DiagonalizationError)
SPDO_DEFINE_ERROR(WindowError)
SPDO_DEFINE_ERROR(StabilityError)
SPDO_DEFINE_ERROR(ConfigError)
SPDO_DEFINE_ERROR(ParseError)

#undef SPDO_DEFINE_ERROR

}  // namespace spdo

#pragma once

#include <stdexcept>
#include <string>

namespace misscrit {

// Base for every failure raised by the library. Subclasses exist so callers
// (and the CLI exit-code mapping) can tell degenerate fits from hard errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define MISSCRIT_DEFINE_ERROR(Name)      \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  };

MISSCRIT_DEFINE_ERROR(NotPositiveDefinite)
MISSCRIT_DEFINE_ERROR(NonFiniteIntegrand)
MISSCRIT_DEFINE_ERROR(NonFiniteValue)
MISSCRIT_DEFINE_ERROR(LabelOutOfRange)
MISSCRIT_DEFINE_ERROR(ConstraintViolation)
MISSCRIT_DEFINE_ERROR(EmptyComponent)
MISSCRIT_DEFINE_ERROR(AllRestartsDegenerate)
MISSCRIT_DEFINE_ERROR(QuadratureUnreliable)
MISSCRIT_DEFINE_ERROR(DegenerateFit)
MISSCRIT_DEFINE_ERROR(TooManyDegenerate)
MISSCRIT_DEFINE_ERROR(ParseError)

#undef MISSCRIT_DEFINE_ERROR

}  // namespace misscrit

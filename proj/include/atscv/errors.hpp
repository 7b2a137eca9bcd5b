#pragma once

#include <stdexcept>
#include <string>

namespace atscv {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define ATSCV_DEFINE_ERROR(Name)      \
  class Name : public Error {         \
   public:                            \
    using Error::Error;               \
  };

ATSCV_DEFINE_ERROR(IllegalActionError)
ATSCV_DEFINE_ERROR(NotTerminatedError)
ATSCV_DEFINE_ERROR(WrongPhaseError)
ATSCV_DEFINE_ERROR(NonPositiveGapError)
ATSCV_DEFINE_ERROR(ZeroDensityError)
ATSCV_DEFINE_ERROR(EmptyInputError)
ATSCV_DEFINE_ERROR(EmptyGroupError)
ATSCV_DEFINE_ERROR(ZeroEstimateError)
ATSCV_DEFINE_ERROR(BudgetExceededError)
ATSCV_DEFINE_ERROR(ConfigError)
ATSCV_DEFINE_ERROR(IoError)

#undef ATSCV_DEFINE_ERROR

}  // namespace atscv

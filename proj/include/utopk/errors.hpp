#pragma once

#include <stdexcept>
#include <string>

namespace utopk {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define UTOPK_DEFINE_ERROR(Name)         \
  class Name : public Error {            \
   public:                               \
    using Error::Error;                  \
  };

UTOPK_DEFINE_ERROR(InvalidArgument)
UTOPK_DEFINE_ERROR(EmptySupport)
UTOPK_DEFINE_ERROR(DuplicateFrame)
UTOPK_DEFINE_ERROR(GridMismatch)
UTOPK_DEFINE_ERROR(AlreadyCertain)
UTOPK_DEFINE_ERROR(UnknownFrame)
UTOPK_DEFINE_ERROR(InsufficientCertain)
UTOPK_DEFINE_ERROR(InsufficientFrames)
UTOPK_DEFINE_ERROR(MissingRetainedFrame)
UTOPK_DEFINE_ERROR(TooManyWorlds)

// Raised for malformed experiment configuration (CLI exit code 2).
UTOPK_DEFINE_ERROR(ConfigError)
// Raised for unreadable or malformed input data (CLI exit code 3).
UTOPK_DEFINE_ERROR(DataError)

#undef UTOPK_DEFINE_ERROR

}  // namespace utopk

#pragma once

#include <stdexcept>
#include <string>

namespace specklediff {

// Every failure raised by the library derives from Error so callers (and the
// CLI) can catch one type and still dispatch on the category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define SPECKLEDIFF_ERROR(Name, Kind)                              \
  class Name : public Error {                                      \
   public:                                                         \
    using Error::Error;                                            \
    const char* kind() const noexcept override { return Kind; }    \
  };

SPECKLEDIFF_ERROR(ConfigError, "config")
SPECKLEDIFF_ERROR(ContractError, "contract")
SPECKLEDIFF_ERROR(IndexError, "index")
SPECKLEDIFF_ERROR(DomainError, "domain")
SPECKLEDIFF_ERROR(DegenerateError, "degenerate")
SPECKLEDIFF_ERROR(SizeError, "size")
SPECKLEDIFF_ERROR(IoError, "io")
SPECKLEDIFF_ERROR(RegistrationError, "registration")
SPECKLEDIFF_ERROR(TrainingError, "training")

#undef SPECKLEDIFF_ERROR

}  // namespace specklediff

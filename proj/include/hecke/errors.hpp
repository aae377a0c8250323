#pragma once

#include <stdexcept>
#include <string>

namespace hecke {

/// Base class for all library errors. `exit_code()` is what the CLI maps
/// each failure mode to.
class Error : public std::runtime_error {
public:
  Error(std::string what, int code) : std::runtime_error(std::move(what)), code_(code) {}
  int exit_code() const noexcept { return code_; }

private:
  int code_;
};

#define HECKE_DEFINE_ERROR(Name, Code)                                         \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string& what) : Error(#Name ": " + what, Code) {} \
  }

HECKE_DEFINE_ERROR(DivisionByPossibleZero, 10);
HECKE_DEFINE_ERROR(UncertainRegion, 11);
HECKE_DEFINE_ERROR(PrecisionExhausted, 12);
HECKE_DEFINE_ERROR(ProbablyZero, 13);
HECKE_DEFINE_ERROR(EmptySpace, 14);
HECKE_DEFINE_ERROR(InsufficientLength, 15);
HECKE_DEFINE_ERROR(NonSquarefreeCharPoly, 16);
HECKE_DEFINE_ERROR(EmbeddingOutOfRange, 17);
HECKE_DEFINE_ERROR(NonPositiveAccuracy, 18);
HECKE_DEFINE_ERROR(NonPositiveImaginaryPart, 19);
HECKE_DEFINE_ERROR(IndeterminateSign, 20);
HECKE_DEFINE_ERROR(UnsupportedLevel, 21);
HECKE_DEFINE_ERROR(CompositeIndex, 22);
HECKE_DEFINE_ERROR(ParseError, 23);
HECKE_DEFINE_ERROR(NotNormalized, 24);
HECKE_DEFINE_ERROR(NetworkError, 25);
HECKE_DEFINE_ERROR(NotFound, 26);

#undef HECKE_DEFINE_ERROR

} // namespace hecke

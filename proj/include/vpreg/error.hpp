#pragma once

#include <stdexcept>
#include <string>

namespace vpreg {

enum class ErrorCode {
  InvalidArgument,
  DomainMismatch,
  DegenerateDomain,
  NonFiniteData,
  NonPositiveJD,
  MassMismatch,
  NonSolenoidalCurl,
  FoldingDetected,
  Stalled,
  MissingHeader,
  SizeMismatch,
  UnknownKind,
  BadMagic,
  UnsupportedDatatype,
  DimOverflow,
  EmptyCohort,
  ZeroBaselineMI,
  Io,
};

const char* to_string(ErrorCode code);

// Numerical failures (as opposed to bad input) map to CLI exit code 3.
bool is_numerical_failure(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vpreg

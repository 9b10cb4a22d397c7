// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include <stdexcept>
#include <string>

namespace polyirt {

// Machine-readable reasons for rejecting inputs or aborting a run.  The CLI
// maps ValidationError to exit code 2 and NumericError to exit code 3.
enum class ErrorCode {
  CategoryOutOfRange,
  EmptyRow,
  EmptyColumn,
  BadCategoryCount,
  NonFiniteInput,
  UnorderedBins,
  NotABijection,
  DimensionMismatch,
  InvalidDimensions,
  InvalidArgument,
  ZeroTruthNorm,
  PunctureMakesRowEmpty,
  PunctureMakesColumnEmpty,
  MissingPrediction,
  TooManyCategoriesForPermutationSearch,
  BadFile,
  NonFiniteLikelihood,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Bad inputs: malformed data files, out-of-range values, broken invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numeric failures during computation (non-finite likelihood, integrand).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace polyirt

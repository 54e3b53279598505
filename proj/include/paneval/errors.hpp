#pragma once

#include <stdexcept>
#include <string>

namespace paneval {

enum class ErrorCode {
  // input / validation
  RaggedHeader,
  NonNumericValue,
  DuplicateCell,
  UnknownVariable,
  TargetCollision,
  UnknownEntity,
  SelfLoop,
  InvalidSpec,
  EmptySubset,
  ZeroDenominator,
  // estimation
  EmptySample,
  AllColumnsCollinear,
  DegenerateSample,
  NoVariation,
  SingleCluster,
  NonBinaryOutcome,
  PerfectSeparation,
  NoConvergence,
  UnbalancedPanel,
  SingleCohortNoControlGroup,
  NonNormalizedWeights,
  RhoAtBoundary,
  SingularSystem,
  TooLarge,
  EmptyCohort,
};

const char* error_code_name(ErrorCode c);

/// Validation errors map to CLI exit 1, estimation errors to exit 2.
bool is_validation_error(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) raise(code, what);
}

}  // namespace paneval

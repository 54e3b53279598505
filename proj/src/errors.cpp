#include "paneval/errors.hpp"

namespace paneval {

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::RaggedHeader: return "RaggedHeader";
    case ErrorCode::NonNumericValue: return "NonNumericValue";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::UnknownVariable: return "UnknownVariable";
    case ErrorCode::TargetCollision: return "TargetCollision";
    case ErrorCode::UnknownEntity: return "UnknownEntity";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptySubset: return "EmptySubset";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::AllColumnsCollinear: return "AllColumnsCollinear";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::NoVariation: return "NoVariation";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::NonBinaryOutcome: return "NonBinaryOutcome";
    case ErrorCode::PerfectSeparation: return "PerfectSeparation";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::UnbalancedPanel: return "UnbalancedPanel";
    case ErrorCode::SingleCohortNoControlGroup: return "SingleCohortNoControlGroup";
    case ErrorCode::NonNormalizedWeights: return "NonNormalizedWeights";
    case ErrorCode::RhoAtBoundary: return "RhoAtBoundary";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::EmptyCohort: return "EmptyCohort";
  }
  return "UnknownError";
}

bool is_validation_error(ErrorCode c) {
  switch (c) {
    case ErrorCode::RaggedHeader:
    case ErrorCode::NonNumericValue:
    case ErrorCode::DuplicateCell:
    case ErrorCode::UnknownVariable:
    case ErrorCode::TargetCollision:
    case ErrorCode::UnknownEntity:
    case ErrorCode::SelfLoop:
    case ErrorCode::InvalidSpec:
    case ErrorCode::EmptySubset:
    case ErrorCode::ZeroDenominator:
      return true;
    default:
      return false;
  }
}

}  // namespace paneval

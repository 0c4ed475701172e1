#include "markov_dpp/error.hpp"

namespace markov_dpp {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonStochasticRow: return "NonStochasticRow";
    case ErrorCode::kNotErgodic: return "NotErgodic";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kBudgetExceeded: return "BudgetExceeded";
    case ErrorCode::kNotReversible: return "NotReversible";
    case ErrorCode::kInvalidBeta: return "InvalidBeta";
    case ErrorCode::kNonPositiveDelta: return "NonPositiveDelta";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kInfeasibleComparator: return "InfeasibleComparator";
    case ErrorCode::kNoFeasiblePoint: return "NoFeasiblePoint";
    case ErrorCode::kDegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace markov_dpp

#ifndef MARKOV_DPP_ERROR_HPP
#define MARKOV_DPP_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace markov_dpp {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonStochasticRow,
  kNotErgodic,
  kNoConvergence,
  kBudgetExceeded,
  kNotReversible,
  kInvalidBeta,
  kNonPositiveDelta,
  kNonFiniteGradient,
  kInfeasibleComparator,
  kNoFeasiblePoint,
  kDegenerateCovariance,
  kInvariantViolation,
  kParseError,
};

std::string_view error_code_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Solver failures keep the 1-based step at which they occurred.
class StepError : public Error {
 public:
  StepError(ErrorCode code, std::size_t step, const std::string& message)
      : Error(code, "step " + std::to_string(step) + ": " + message),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace markov_dpp

#endif  // MARKOV_DPP_ERROR_HPP

#ifndef MARKOV_DPP_TRAJECTORY_HPP
#define MARKOV_DPP_TRAJECTORY_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace markov_dpp {

// A failed per-step lemma check: `lhs <= rhs` did not hold.
struct InvariantViolation {
  std::size_t step = 0;
  std::string check;
  std::size_t constraint = 0;
  double lhs = 0.0;
  double rhs = 0.0;
};

// Everything observed and decided at step t. x and Q are the values the step
// started from (x_t, Q_t); f/g columns are the observed functions at x_t.
struct StepRecord {
  std::size_t t = 0;
  std::size_t samples = 1;  // N_t
  int level = 0;            // MLMC level J_t, 0 for single-sample steps
  bool truncated = false;
  double V = 0.0;
  double alpha = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd Q;
  double f_at_x = 0.0;
  Eigen::VectorXd g_at_x;
  double f_samples_at_x = 0.0;  // sum_j f(x_t, s_j) over the step's samples
  Eigen::VectorXd g_samples_at_x;
  double F = 0.0;  // ||grad f_t(x_t)||
  Eigen::VectorXd G;
  Eigen::VectorXd H;
  std::vector<std::size_t> states;
};

struct Trajectory {
  std::string instance;
  std::string schedule;
  std::uint64_t seed = 0;
  std::vector<StepRecord> steps;
  Eigen::VectorXd x_final;  // x_{T+1}
  Eigen::VectorXd Q_final;  // Q_{T+1}
  std::size_t samples_consumed = 0;
  std::vector<InvariantViolation> violations;
  std::size_t checks_performed = 0;

  std::size_t length() const { return steps.size(); }
  std::size_t n_constraints() const {
    return steps.empty() ? static_cast<std::size_t>(Q_final.size())
                         : static_cast<std::size_t>(steps.front().Q.size());
  }
};

}  // namespace markov_dpp

#endif  // MARKOV_DPP_TRAJECTORY_HPP

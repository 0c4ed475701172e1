#ifndef MARKOV_DPP_METRICS_HPP
#define MARKOV_DPP_METRICS_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "markov_dpp/mlmc.hpp"
#include "markov_dpp/problem.hpp"
#include "markov_dpp/trajectory.hpp"

namespace markov_dpp {

inline constexpr double kFeasibilityTolerance = 1e-8;
inline constexpr double kKktTolerance = 1e-6;

// The observed function of a recorded step, rebuilt from its states.
StepFunction step_function(const ProblemInstance& instance, const StepRecord& step);

// x_bar_T = (1/T) sum_{t<=T} x_t (x_{T+1} excluded).
Eigen::VectorXd average_iterate(const Trajectory& traj);

// sum_t f_t(x_t) - sum_t f_t(comparator). With `benchmark` the comparator must
// be feasible for the averaged problem (Error{kInfeasibleComparator}).
double regret(const ProblemInstance& instance, const Trajectory& traj,
              const Eigen::VectorXd& comparator, bool benchmark = false);
std::vector<double> cumulative_regret(const ProblemInstance& instance, const Trajectory& traj,
                                      const Eigen::VectorXd& comparator);
// Same sum over every raw sample f(., s_j) instead of the estimator.
double per_sample_regret(const ProblemInstance& instance, const Trajectory& traj,
                         const Eigen::VectorXd& comparator);

// sum_t g_{t,i}(x_t), signed.
double violation(const Trajectory& traj, std::size_t i);
std::vector<double> cumulative_violation(const Trajectory& traj, std::size_t i);

enum class ReferenceMethod { kGrid, kDescent };
std::string reference_method_name(ReferenceMethod m);

struct ReferenceSolution {
  Eigen::VectorXd x_star;
  double f_bar_star = 0.0;
  ReferenceMethod method = ReferenceMethod::kDescent;
  double tolerance = 0.0;      // KKT residual (descent) or final mesh spacing (grid)
  double max_violation = 0.0;  // max_i bar g_i(x_star)
};

struct ReferenceOptions {
  ReferenceMethod method = ReferenceMethod::kDescent;
  std::size_t grid_points = 17;
  std::size_t grid_levels = 14;
  std::size_t grid_beam = 4;  // candidates refined per level
  std::size_t max_outer = 200;
  std::size_t max_inner = 20000;
};

// min bar f s.t. bar g <= 0 on the exact stationary average.
// Throws Error{kNoFeasiblePoint}.
ReferenceSolution reference_solution(const ProblemInstance& instance,
                                     const ReferenceOptions& options = {});

double gap(const ProblemInstance& instance, const Eigen::VectorXd& x_bar,
           const ReferenceSolution& ref);
Eigen::VectorXd infeasibility(const ProblemInstance& instance, const Eigen::VectorXd& x_bar);

// Trajectory CSV. Cumulative regret is emitted only with a comparator.
void write_trajectory_csv(std::ostream& out, const ProblemInstance& instance,
                          const Trajectory& traj,
                          const std::optional<Eigen::VectorXd>& comparator = std::nullopt);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;  // Error{kParseError} if missing
};
CsvTable read_csv(std::istream& in);

struct RunSummary {
  double final_gap = 0.0;
  std::vector<double> final_infeasibility;
  double regret = 0.0;
  std::vector<double> violation;
  double tau_mix = 0.0;
  std::uint64_t seed = 0;
  double wall_time_ms = 0.0;
  std::size_t iterations = 0;
  std::size_t samples = 0;
  nlohmann::json config = nlohmann::json::object();
  std::string version;
};

RunSummary summarize(const ProblemInstance& instance, const Trajectory& traj,
                     const ReferenceSolution& ref);
nlohmann::json to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& j);

// Sum-lemma bounds; each returns {lhs, rhs} for lhs <= rhs.
struct SumBound {
  double lhs = 0.0;
  double rhs = 0.0;
};
// sum_t x_t / sqrt(X_t) <= 2 sqrt(X_T), X_t = sum_{s<=t} x_s (terms with X_t = 0 skipped).
SumBound sqrt_sum_bound(const std::vector<double>& x);
// sum_{t=1}^T t^q <= ((T+1)^{q+1} - 1) / (q+1) for q > 0.
SumBound power_sum_bound(std::size_t T, double q);
// With X_0 = delta, X_t = X_{t-1} + x_t, 0 <= x_t <= C, delta <= C and 0 < gamma != 1:
//   sum_t X_{t-1}^{-gamma} x_t <= C delta^{-gamma}
//       + (max(delta, X_T - C)^{1-gamma} - delta^{1-gamma}) / (1 - gamma).
SumBound lagged_power_sum_bound(const std::vector<double>& x, double delta, double C, double gamma);

}  // namespace markov_dpp

#endif  // MARKOV_DPP_METRICS_HPP

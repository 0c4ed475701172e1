#ifndef MARKOV_DPP_SOLVER_HPP
#define MARKOV_DPP_SOLVER_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "markov_dpp/mlmc.hpp"
#include "markov_dpp/problem.hpp"
#include "markov_dpp/trajectory.hpp"

namespace markov_dpp {

// V_t = (tau t)^beta, alpha_t = tau t. With tau = 1 this is the plain
// time-varying DPP baseline.
struct EdppSchedule {
  double tau_mix = 1.0;
  double beta = 0.5;
};

// V = (tau T)^beta, alpha = tau T for every step.
struct EdppFixedHorizonSchedule {
  double tau_mix = 1.0;
  std::size_t horizon = 1;
  double beta = 0.5;
};

// V = sqrt(T), alpha = T.
struct DppFixedSchedule {
  std::size_t horizon = 1;
};

// V_t = S_{t-1}^beta / R, alpha_t = S_{t-1} / R^2 with S_0 = delta.
struct MdppSchedule {
  double beta = 0.5;
  double delta = 1.0;
  double R = 1.0;
  // a_t carries "+ delta" in the single-constraint definition; the
  // multi-constraint experiment keeps delta only in S_0.
  bool delta_in_increment = true;
};

// V_t = S_t^beta / R, alpha_t = S_t / R^2 with S_0 = 0 (adversarial constraints).
struct AdversarialSchedule {
  double beta = 0.5;
  double R = 1.0;
};

using ParameterSchedule = std::variant<EdppSchedule, EdppFixedHorizonSchedule, DppFixedSchedule,
                                       MdppSchedule, AdversarialSchedule>;

// Throws Error{kInvalidBeta} or Error{kNonPositiveDelta} / {kInvalidArgument}.
void validate_schedule(const ParameterSchedule& schedule);
std::string schedule_name(const ParameterSchedule& schedule);

// Whether the schedule reads the accumulator after adding a_t (S_t) rather
// than before (S_{t-1}).
bool reads_updated_accumulator(const ParameterSchedule& schedule);
bool uses_accumulator(const ParameterSchedule& schedule);

// Running sum S_t of a_t = F_t^2/4 + sum_i R^2 G_{t,i}^2 + sum_i H_{t,i}^2 (+ delta).
class AdaptiveAccumulator {
 public:
  AdaptiveAccumulator() = default;
  static AdaptiveAccumulator for_schedule(const ParameterSchedule& schedule);

  double total() const { return total_; }
  double delta() const { return delta_; }
  const std::vector<double>& history() const { return history_; }

  // Adds a_t and returns it.
  double add(double F, const Eigen::VectorXd& G, const Eigen::VectorXd& H, double R);

 private:
  double total_ = 0.0;
  double delta_ = 0.0;
  bool delta_in_increment_ = false;
  std::vector<double> history_;
};

struct ScheduleParams {
  double V = 0.0;
  double alpha = 0.0;
};

// `accumulator` must already hold S_{t-1} (MDPP) or S_t (adversarial).
ScheduleParams schedule_params(const ParameterSchedule& schedule, std::size_t t,
                               const AdaptiveAccumulator& accumulator = {});

struct SolverState {
  std::size_t t = 1;
  Eigen::VectorXd x;
  Eigen::VectorXd Q;
  AdaptiveAccumulator accumulator;
};

SolverState initial_state(const ProblemInstance& instance, const ParameterSchedule& schedule);

// argmin_{x in X} c^T x + alpha ||x - x_t||^2 with c = V grad_f + sum_i Q_i grad_g_i,
// i.e. project(x_t - c / (2 alpha)). Rows of grad_g are the constraint gradients.
Eigen::VectorXd primal_update(const Domain& domain, const Eigen::VectorXd& x, double V,
                              double alpha, const Eigen::VectorXd& grad_f,
                              const Eigen::VectorXd& Q, const Eigen::MatrixXd& grad_g);

// [Q + g + grad_g^T dx]_+
double dual_update(double Q, double g_val, const Eigen::VectorXd& grad_g, const Eigen::VectorXd& dx);

struct RunOptions {
  bool debug_asserts = false;
  bool throw_on_violation = false;
  std::size_t probe_points = 20;
  std::uint64_t seed = 0;  // probes; recorded in the trajectory
  std::optional<Eigen::VectorXd> x1;
  // Stop early once the next step would push the samples consumed past this.
  std::optional<std::size_t> sample_budget;
};

// observe -> schedule -> primal -> dual, T times (fewer under a sample budget).
Trajectory run(const ProblemInstance& instance, DataStream& stream,
               const ParameterSchedule& schedule, std::size_t T, const RunOptions& options = {});

enum class StreamKind { kAuto, kSingleSample, kMlmc };

struct ChainRunOptions {
  RunOptions run;
  StreamKind stream = StreamKind::kAuto;  // MDPP uses MLMC, everything else single samples
  MlmcOptions mlmc;
  std::optional<std::size_t> initial_state;  // default: drawn from the stationary law
};

// Simulates the instance's chain from `seed` and runs the schedule on it.
Trajectory run_on_chain(const ProblemInstance& instance, const ParameterSchedule& schedule,
                        std::size_t T, std::uint64_t seed, const ChainRunOptions& options = {});

}  // namespace markov_dpp

#endif  // MARKOV_DPP_SOLVER_HPP

#ifndef MARKOV_DPP_CHAIN_HPP
#define MARKOV_DPP_CHAIN_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "markov_dpp/random.hpp"

namespace markov_dpp {

inline constexpr double kRowSumTolerance = 1e-12;
inline constexpr double kStationaryTolerance = 1e-12;
inline constexpr std::size_t kStationaryMaxIterations = 1'000'000;
inline constexpr double kReversibilityTolerance = 1e-10;
inline constexpr std::int64_t kMixingTimeCap = 10'000'000;

// Row-stochastic matrix of a finite, time-homogeneous Markov chain. The
// constructor only enforces stochasticity; ergodicity is checked by
// validate() because some tooling (d_mix on a periodic chain) is still
// meaningful without it.
class TransitionMatrix {
 public:
  explicit TransitionMatrix(Eigen::MatrixXd p);
  static TransitionMatrix from_rows(const std::vector<std::vector<double>>& rows);

  // The 3-state chain with 1-2p on the diagonal and p elsewhere.
  static TransitionMatrix symmetric_three_state(double p);

  std::size_t size() const { return static_cast<std::size_t>(p_.rows()); }
  const Eigen::MatrixXd& matrix() const { return p_; }
  double operator()(std::size_t i, std::size_t j) const { return p_(i, j); }

  // Returns p when the matrix is the symmetric 3-state family above.
  std::optional<double> symmetric_three_state_parameter() const;

 private:
  Eigen::MatrixXd p_;
};

struct ChainDiagnosis {
  bool stochastic = true;
  std::optional<std::size_t> bad_row;  // first row violating stochasticity
  double worst_row_error = 0.0;
  bool ergodic = false;
  std::optional<std::size_t> positive_power;  // smallest k with P^k > 0
};

// Structured check without throwing.
ChainDiagnosis diagnose(const Eigen::MatrixXd& p);

// Throws Error{kNonStochasticRow} or Error{kNotErgodic}.
void validate(const Eigen::MatrixXd& p);
void validate(const TransitionMatrix& p);

// Power iteration from the uniform distribution until successive iterates
// differ by less than kStationaryTolerance in the max norm.
Eigen::VectorXd stationary_distribution(const TransitionMatrix& p);

double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& p, std::int64_t t);

// Worst-case total variation distance to stationarity after t steps; the
// supremum over initial distributions is attained at a point mass.
double d_mix(const TransitionMatrix& p, std::int64_t t);
double d_mix(const TransitionMatrix& p, const Eigen::VectorXd& mu, std::int64_t t);

// Smallest t >= 1 with d_mix(t) <= eps (doubling, then bisection).
std::int64_t mixing_time(const TransitionMatrix& p, double eps,
                         std::int64_t cap = kMixingTimeCap);

struct SpectralBounds {
  double lower = 0.0;
  double upper = 0.0;
  double lambda2 = 0.0;
  double lambda_min = 0.0;
  double mu_min = 0.0;
};

bool is_reversible(const TransitionMatrix& p, const Eigen::VectorXd& mu,
                   double tol = kReversibilityTolerance);

// Eigenvalue bracket on tau_mix for reversible ergodic chains:
//   |l2| ln2 / (1 - l*)  <=  tau_mix  <=  ln(4 / mu_min) / (1 - l*)
// with l* = max(|l2|, |ln|). Throws Error{kNotReversible}.
SpectralBounds spectral_mixing_bounds(const TransitionMatrix& p);

struct MixingReport {
  std::int64_t tau_mix = 0;   // tau_mix(1/4)
  std::int64_t tau_of_T = 0;  // tau_mix(1/T)
  std::int64_t horizon = 0;
  double eps = 0.25;
  std::int64_t tau_eps = 0;  // tau_mix(eps) for the requested eps
  std::optional<double> spectral_lower;
  std::optional<double> spectral_upper;
  std::optional<double> approx;  // 1/(3p) for the symmetric 3-state family
};

MixingReport mixing_report(const TransitionMatrix& p, std::int64_t horizon,
                           double eps = 0.25);

// Anything that yields chain states one at a time.
class StateSource {
 public:
  virtual ~StateSource() = default;
  virtual std::size_t next_state() = 0;
};

// Single-owner simulator. The emitted sequence is a pure function of
// (matrix, seed, initial state).
class ChainSampler : public StateSource {
 public:
  ChainSampler(TransitionMatrix matrix, std::uint64_t seed, std::size_t initial_state);

  // Initial state drawn from `initial` using a child stream of `seed`.
  static ChainSampler from_distribution(TransitionMatrix matrix, std::uint64_t seed,
                                        const Eigen::VectorXd& initial);

  std::size_t current() const { return current_; }

  // Advances one transition and returns the new state.
  std::size_t step();
  std::size_t next_state() override { return step(); }

  const TransitionMatrix& matrix() const { return matrix_; }

 private:
  TransitionMatrix matrix_;
  Eigen::MatrixXd cumulative_;
  Rng rng_;
  std::size_t current_;
};

// Replays a recorded state sequence; used to feed several algorithms the same
// chain realization.
class ReplaySource : public StateSource {
 public:
  explicit ReplaySource(const std::vector<std::size_t>* states) : states_(states) {}
  std::size_t next_state() override;
  std::size_t consumed() const { return position_; }
  std::size_t remaining() const { return states_->size() - position_; }

 private:
  const std::vector<std::size_t>* states_;
  std::size_t position_ = 0;
};

std::size_t sample_categorical(Rng& rng, const Eigen::VectorXd& probabilities);

}  // namespace markov_dpp

#endif  // MARKOV_DPP_CHAIN_HPP

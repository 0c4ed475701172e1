#ifndef MARKOV_DPP_PROBLEM_HPP
#define MARKOV_DPP_PROBLEM_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "markov_dpp/chain.hpp"
#include "markov_dpp/random.hpp"

namespace markov_dpp {

// Compact convex feasible set with the squared-Euclidean mirror map
// Phi(x) = ||x||^2, whose Bregman divergence is D(x, y) = ||x - y||^2.
class Domain {
 public:
  enum class Kind { kBox, kBall };

  static Domain box(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static Domain box(std::size_t dim, double lo, double hi);
  static Domain ball(Eigen::VectorXd center, double radius);

  Kind kind() const { return kind_; }
  std::size_t dim() const { return static_cast<std::size_t>(a_.size()); }

  // Bound on the Bregman divergence over the domain: D(x, y) <= R^2.
  double bregman_radius() const { return radius_r_; }
  // Replaces the exact diameter with a user-supplied (larger) bound.
  void set_bregman_radius(double r);

  // Box: lower/upper corners. Ball: a_ = center, radius in ball_radius().
  const Eigen::VectorXd& lower() const { return a_; }
  const Eigen::VectorXd& upper() const { return b_; }
  const Eigen::VectorXd& center() const { return a_; }
  double ball_radius() const { return ball_radius_; }

  Eigen::VectorXd project(const Eigen::VectorXd& y) const;
  bool contains(const Eigen::VectorXd& x, double tol = 1e-12) const;
  Eigen::VectorXd sample(Rng& rng) const;

 private:
  Domain() = default;

  Kind kind_ = Kind::kBox;
  Eigen::VectorXd a_;
  Eigen::VectorXd b_;
  double ball_radius_ = 0.0;
  double radius_r_ = 0.0;
};

Eigen::VectorXd project(const Domain& domain, const Eigen::VectorXd& y);
double bregman(const Domain& domain, const Eigen::VectorXd& x, const Eigen::VectorXd& y);

using ScalarFn = std::function<double(const Eigen::VectorXd&)>;
using GradientFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// Objective and constraint oracles attached to one chain state.
struct StateOracle {
  ScalarFn f;
  GradientFn grad_f;
  std::vector<ScalarFn> g;
  std::vector<GradientFn> grad_g;
};

// Everything the solver reads at one point: f, grad f, g_i, and grad g_i
// stored as the rows of grad_g.
struct PointEval {
  double f = 0.0;
  Eigen::VectorXd grad_f;
  Eigen::VectorXd g;
  Eigen::MatrixXd grad_g;
};

PointEval evaluate(const StateOracle& oracle, const Eigen::VectorXd& x);

struct LipschitzBounds {
  double F = 0.0;  // bound on ||grad f||
  double G = 0.0;  // bound on ||grad g_i||
  double H = 0.0;  // bound on |g_i|
};

struct SlaterPoint {
  Eigen::VectorXd x_hat;
  double epsilon = 0.0;
};

struct BarEval {
  double f = 0.0;
  Eigen::VectorXd g;
};

// Stochastic-constrained problem over a finite-state chain: minimize
// E_mu[f(x, s)] subject to E_mu[g_i(x, s)] <= 0. Immutable once built.
class ProblemInstance {
 public:
  ProblemInstance(std::string name, Domain domain, std::vector<StateOracle> oracles,
                  TransitionMatrix chain, Eigen::VectorXd initial_point);

  const std::string& name() const { return name_; }
  const Domain& domain() const { return domain_; }
  std::size_t dim() const { return domain_.dim(); }
  std::size_t n_states() const { return oracles_.size(); }
  std::size_t n_constraints() const { return n_constraints_; }
  const StateOracle& oracle(std::size_t state) const { return oracles_.at(state); }
  const TransitionMatrix& chain() const { return chain_; }
  const Eigen::VectorXd& stationary() const { return mu_; }
  const Eigen::VectorXd& initial_point() const { return x1_; }

  const std::optional<LipschitzBounds>& lipschitz() const { return lipschitz_; }
  void set_lipschitz(LipschitzBounds b) { lipschitz_ = b; }
  const std::optional<SlaterPoint>& slater() const { return slater_; }
  // Throws Error{kInvalidArgument} unless every bar g_i(x_hat) <= -epsilon.
  void set_slater(SlaterPoint s);

  // A copy driven by a different chain over the same states.
  ProblemInstance with_chain(TransitionMatrix chain) const;

 private:
  std::string name_;
  Domain domain_;
  std::vector<StateOracle> oracles_;
  std::size_t n_constraints_ = 0;
  TransitionMatrix chain_;
  Eigen::VectorXd mu_;
  Eigen::VectorXd x1_;
  std::optional<LipschitzBounds> lipschitz_;
  std::optional<SlaterPoint> slater_;
};

// Exact stationary averages sum_s mu_s f(x, s) and sum_s mu_s g_i(x, s).
BarEval bar_eval(const ProblemInstance& instance, const Eigen::VectorXd& x);
PointEval bar_eval_with_gradients(const ProblemInstance& instance, const Eigen::VectorXd& x);

inline constexpr double kLipschitzSafetyFactor = 1.1;

// Max of ||grad f||, ||grad g_i||, |g_i| over `samples` uniform domain points
// times every state, inflated by kLipschitzSafetyFactor.
LipschitzBounds estimate_lipschitz(const ProblemInstance& instance, std::size_t samples,
                                   std::uint64_t seed);

}  // namespace markov_dpp

#endif  // MARKOV_DPP_PROBLEM_HPP

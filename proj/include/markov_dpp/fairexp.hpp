#ifndef MARKOV_DPP_FAIREXP_HPP
#define MARKOV_DPP_FAIREXP_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "markov_dpp/metrics.hpp"
#include "markov_dpp/mlmc.hpp"
#include "markov_dpp/problem.hpp"
#include "markov_dpp/trajectory.hpp"

namespace markov_dpp {

struct ClusterSpec {
  std::size_t state = 0;
  int label = 1;
  Eigen::Vector2d mean;
  Eigen::Matrix2d covariance;
};

// How z is drawn from the rotated point x' = R(rotation) x.
//   kLikelihoodRatio: P(z = 1) = p_+(x') / (p_+(x') + p_-(x')) with p_+- the
//                     label-conditional cluster mixtures.
//   kLogistic:        P(z = 1) = sigmoid(sharpness * x'^T d), d the unit
//                     direction between the label means.
enum class SensitiveRule { kLikelihoodRatio, kLogistic };

struct DatasetSpec {
  std::vector<ClusterSpec> clusters;
  std::size_t points_per_cluster = 1000;
  double rotation = 1.5707963267948966;  // pi / 2
  SensitiveRule rule = SensitiveRule::kLikelihoodRatio;
  double sharpness = 1.0;
};

// Label +1 at (2,2), (4,4), (6,2) and -1 at (-2,-2), (-4,-4), (-6,-2) for
// states 0, 1, 2; covariance 1.5 I.
DatasetSpec default_cluster_spec();

struct FairDataset {
  Eigen::MatrixX2d points;
  Eigen::VectorXd labels;     // +-1
  Eigen::VectorXd sensitive;  // 0/1
  std::vector<std::size_t> state;
  std::size_t n_states = 3;
  double z_bar = 0.0;

  std::vector<std::size_t> members(std::size_t s) const;
};

// Error{kDegenerateCovariance} when a covariance is not positive definite.
FairDataset generate_data(std::uint64_t seed, const DatasetSpec& spec);

inline constexpr double kFairnessBoxHalfWidth = 10.0;

// Per state: logistic loss, and the two covariance constraints
// g = mean((z - z_bar)(w^T x + b)) - c, h = -mean(...) - c, on (w1, w2, b) in
// [-10, 10]^3 over the symmetric 3-state chain with parameter p.
ProblemInstance fairness_oracles(const FairDataset& data, double c, double p);

// Bounds F, G, H valid over the whole box for every state.
LipschitzBounds fairness_bounds(const FairDataset& data, double c);

// delta = F^2/4 + 2 R^2 G^2 + 2 H^2.
double delta_recipe(const LipschitzBounds& b, double R);

enum class FairAlgorithm { kEdppT, kEdppFixed, kDppT, kDppFixed, kMdpp };
std::string algorithm_name(FairAlgorithm a);
FairAlgorithm parse_algorithm(const std::string& name);  // Error{kInvalidArgument}

struct FairExperimentConfig {
  double p = 0.001;
  double c = 0.5;
  std::size_t T = 25000;
  std::uint64_t seed = 0;
  std::vector<FairAlgorithm> algorithms{FairAlgorithm::kEdppT, FairAlgorithm::kEdppFixed,
                                        FairAlgorithm::kDppT, FairAlgorithm::kDppFixed,
                                        FairAlgorithm::kMdpp};
  double beta = 0.5;
  std::optional<double> tau_mix;  // default 1/(3p)
  std::size_t mlmc_cap = 16;
  TruncationRule truncation = TruncationRule::kFallbackToOne;
  std::optional<double> delta;               // default: delta_recipe
  std::optional<std::size_t> sample_budget;  // MDPP budget, default T
  std::size_t points_per_cluster = 1000;
  SensitiveRule sensitive_rule = SensitiveRule::kLikelihoodRatio;
  bool debug_asserts = false;
  std::size_t threads = 1;
};

// Throws Error{kInvalidArgument} on out-of-range values.
void validate(const FairExperimentConfig& config);

struct FairRunResult {
  FairAlgorithm algorithm;
  Trajectory trajectory;
  RunSummary summary;
};

struct FairExperimentResult {
  FairExperimentConfig config;
  ProblemInstance instance;
  ReferenceSolution reference;
  double tau_mix = 0.0;
  double delta = 0.0;
  std::vector<FairRunResult> runs;
};

// One shared chain realization drives every algorithm; MDPP stops when its
// next estimator would exceed the sample budget.
FairExperimentResult run_experiment(const FairExperimentConfig& config);

}  // namespace markov_dpp

#endif  // MARKOV_DPP_FAIREXP_HPP

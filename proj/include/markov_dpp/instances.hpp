#ifndef MARKOV_DPP_INSTANCES_HPP
#define MARKOV_DPP_INSTANCES_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "markov_dpp/problem.hpp"

namespace markov_dpp {

// Two-dimensional quadratic/linear instance on [-1, 1]^2 over the symmetric
// 3-state chain. State s has
//   f_s(x) = 0.5 ||x - a_s||^2,  g_s(x) = b_s^T x - c_s
// and the averaged problem is min 0.5 ||x - (0.6, 0.6)||^2 s.t. x1 + x2 <= 0.5,
// solved by x* = (0.25, 0.25) with multiplier 0.35.
ProblemInstance synthetic_instance(double p);

inline const Eigen::Vector2d kSyntheticOptimum{0.25, 0.25};
inline constexpr double kSyntheticMultiplier = 0.35;

struct InstanceParams {
  double p = 0.1;  // chain parameter for synth-markov and fairness3
  std::uint64_t seed = 0;
  double fairness_slack = 0.5;
};

// "synth-iid" (p = 1/3), "synth-markov", "fairness3". Error{kInvalidArgument}
// for unknown names.
ProblemInstance make_instance(const std::string& name, const InstanceParams& params = {});
std::vector<std::string> instance_names();

}  // namespace markov_dpp

#endif  // MARKOV_DPP_INSTANCES_HPP

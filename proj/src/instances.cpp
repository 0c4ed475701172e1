#include "markov_dpp/instances.hpp"

#include <cmath>

#include "markov_dpp/error.hpp"
#include "markov_dpp/fairexp.hpp"

namespace markov_dpp {

ProblemInstance synthetic_instance(double p) {
  const std::vector<Eigen::Vector2d> targets{{1.0, 0.2}, {0.2, 1.0}, {0.6, 0.6}};
  const std::vector<Eigen::Vector2d> normals{{1.5, 0.5}, {0.5, 1.5}, {1.0, 1.0}};
  const std::vector<double> offsets{0.3, 0.7, 0.5};

  std::vector<StateOracle> oracles;
  for (std::size_t s = 0; s < 3; ++s) {
    const Eigen::VectorXd a = targets[s];
    const Eigen::VectorXd b = normals[s];
    const double c = offsets[s];
    StateOracle o;
    o.f = [a](const Eigen::VectorXd& x) { return 0.5 * (x - a).squaredNorm(); };
    o.grad_f = [a](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x - a; };
    o.g.push_back([b, c](const Eigen::VectorXd& x) { return b.dot(x) - c; });
    o.grad_g.push_back([b](const Eigen::VectorXd&) -> Eigen::VectorXd { return b; });
    oracles.push_back(std::move(o));
  }
  ProblemInstance instance(std::abs(p - 1.0 / 3.0) < 1e-15 ? "synth-iid" : "synth-markov",
                           Domain::box(2, -1.0, 1.0), std::move(oracles),
                           TransitionMatrix::symmetric_three_state(p),
                           Eigen::Vector2d(-1.0, -1.0));
  // Exact bounds over the box: the largest gradient distance is from the
  // corner (-1, -1), the largest |g| is state 1 at (-1, -1).
  instance.set_lipschitz({std::sqrt(5.44), std::sqrt(2.5), 2.7});
  instance.set_slater({Eigen::Vector2d(-1.0, -1.0), 2.5});
  return instance;
}

ProblemInstance make_instance(const std::string& name, const InstanceParams& params) {
  if (name == "synth-iid") return synthetic_instance(1.0 / 3.0);
  if (name == "synth-markov") return synthetic_instance(params.p);
  if (name == "fairness3") {
    const FairDataset data = generate_data(params.seed, default_cluster_spec());
    return fairness_oracles(data, params.fairness_slack, params.p);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown instance '" + name + "'");
}

std::vector<std::string> instance_names() { return {"synth-iid", "synth-markov", "fairness3"}; }

}  // namespace markov_dpp

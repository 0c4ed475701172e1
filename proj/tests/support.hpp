#ifndef MARKOV_DPP_TESTS_SUPPORT_HPP
#define MARKOV_DPP_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "markov_dpp/chain.hpp"
#include "markov_dpp/problem.hpp"
#include "markov_dpp/random.hpp"

namespace markov_dpp::testing {

// Central differences of a scalar oracle.
inline Eigen::VectorXd numeric_gradient(const ScalarFn& f, const Eigen::VectorXd& x,
                                        double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up(k) += h;
    down(k) -= h;
    g(k) = (f(up) - f(down)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

// Random positive row-stochastic matrix, ergodic and generally not reversible.
inline TransitionMatrix random_chain(Rng& rng, std::size_t n) {
  Eigen::MatrixXd p(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p(i, j) = 0.05 + uniform01(rng);
      total += p(i, j);
    }
    p.row(i) /= total;
  }
  return TransitionMatrix(p);
}

// Smooth convex instance with 2-4 states, 1-2 constraints on a box or ball in
// dimension 2 or 3. Each state has
//   f_s(x) = 0.5 (x - a_s)^T D_s (x - a_s) + log(1 + exp(u_s^T x))
//   g_{s,i}(x) = b_{s,i}^T (x - x_hat) + k_{s,i} ||x - x_hat||^2 - e_{s,i}
// so every g_{s,i}(x_hat) < 0.
inline ProblemInstance random_instance(std::uint64_t seed) {
  Rng rng(seed);
  auto u = [&rng](double lo, double hi) { return lo + (hi - lo) * uniform01(rng); };
  const std::size_t dim = 2 + static_cast<std::size_t>(rng() % 2);
  const std::size_t n_states = 2 + static_cast<std::size_t>(rng() % 3);
  const std::size_t n_constraints = 1 + static_cast<std::size_t>(rng() % 2);
  const bool ball = rng() % 2 == 0;

  Domain domain = ball ? Domain::ball(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim)),
                                      u(0.5, 2.0))
                       : Domain::box(dim, -u(0.5, 2.0), u(0.5, 2.0));
  Eigen::VectorXd x_hat = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));

  std::vector<StateOracle> oracles;
  double min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < n_states; ++s) {
    Eigen::VectorXd a(dim), w(dim), d(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      a(k) = u(-3.0, 3.0);
      w(k) = u(-1.0, 1.0);
      d(k) = u(0.1, 3.0);
    }
    StateOracle o;
    o.f = [a, w, d](const Eigen::VectorXd& x) {
      const Eigen::VectorXd r = x - a;
      const double z = w.dot(x);
      const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
      return 0.5 * r.dot(d.cwiseProduct(r)) + softplus;
    };
    o.grad_f = [a, w, d](const Eigen::VectorXd& x) -> Eigen::VectorXd {
      const double sigma = 1.0 / (1.0 + std::exp(-w.dot(x)));
      return d.cwiseProduct(x - a) + sigma * w;
    };
    for (std::size_t i = 0; i < n_constraints; ++i) {
      Eigen::VectorXd b(dim);
      for (std::size_t k = 0; k < dim; ++k) b(k) = u(-2.0, 2.0);
      const double curvature = u(0.0, 1.0);
      const double slack = u(0.1, 1.0);
      min_slack = std::min(min_slack, slack);
      o.g.push_back([b, curvature, slack, x_hat](const Eigen::VectorXd& x) {
        const Eigen::VectorXd r = x - x_hat;
        return b.dot(r) + curvature * r.squaredNorm() - slack;
      });
      o.grad_g.push_back([b, curvature, x_hat](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return b + 2.0 * curvature * (x - x_hat);
      });
    }
    oracles.push_back(std::move(o));
  }
  Eigen::VectorXd x1 = domain.sample(rng);
  TransitionMatrix chain = random_chain(rng, n_states);
  ProblemInstance instance("random-" + std::to_string(seed), std::move(domain), std::move(oracles),
                           std::move(chain), std::move(x1));
  instance.set_lipschitz(estimate_lipschitz(instance, 2000, seed));
  instance.set_slater({x_hat, min_slack});
  return instance;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh empty directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("markov_dpp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace markov_dpp::testing

#endif  // MARKOV_DPP_TESTS_SUPPORT_HPP

#include "markov_dpp/problem.hpp"

#include <algorithm>
#include <cmath>

#include "markov_dpp/error.hpp"

namespace markov_dpp {

Domain Domain::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  if (lo.size() == 0 || lo.size() != hi.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "box bounds must be non-empty and of equal length");
  }
  if (!(lo.array() < hi.array()).all()) {
    throw Error(ErrorCode::kInvalidArgument, "box needs lo < hi in every coordinate");
  }
  Domain d;
  d.kind_ = Kind::kBox;
  d.a_ = std::move(lo);
  d.b_ = std::move(hi);
  d.radius_r_ = (d.b_ - d.a_).norm();
  return d;
}

Domain Domain::box(std::size_t dim, double lo, double hi) {
  const auto n = static_cast<Eigen::Index>(dim);
  return box(Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi));
}

Domain Domain::ball(Eigen::VectorXd center, double radius) {
  if (center.size() == 0) throw Error(ErrorCode::kDimensionMismatch, "ball center is empty");
  if (!(radius > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ball radius must be positive");
  Domain d;
  d.kind_ = Kind::kBall;
  d.a_ = std::move(center);
  d.b_ = d.a_;
  d.ball_radius_ = radius;
  d.radius_r_ = 2.0 * radius;
  return d;
}

void Domain::set_bregman_radius(double r) {
  if (!(r > 0.0)) throw Error(ErrorCode::kInvalidArgument, "Bregman radius must be positive");
  radius_r_ = r;
}

Eigen::VectorXd Domain::project(const Eigen::VectorXd& y) const {
  if (static_cast<std::size_t>(y.size()) != dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "point has dimension " + std::to_string(y.size()) + ", domain has " +
                    std::to_string(dim()));
  }
  if (kind_ == Kind::kBox) return y.cwiseMax(a_).cwiseMin(b_);
  const Eigen::VectorXd offset = y - a_;
  const double norm = offset.norm();
  if (norm <= ball_radius_) return y;
  return a_ + offset * (ball_radius_ / norm);
}

bool Domain::contains(const Eigen::VectorXd& x, double tol) const {
  if (static_cast<std::size_t>(x.size()) != dim()) return false;
  if (kind_ == Kind::kBox) {
    return ((x.array() >= a_.array() - tol) && (x.array() <= b_.array() + tol)).all();
  }
  return (x - a_).norm() <= ball_radius_ + tol;
}

Eigen::VectorXd Domain::sample(Rng& rng) const {
  const auto n = static_cast<Eigen::Index>(dim());
  Eigen::VectorXd x(n);
  if (kind_ == Kind::kBox) {
    for (Eigen::Index i = 0; i < n; ++i) x(i) = a_(i) + (b_(i) - a_(i)) * uniform01(rng);
    return x;
  }
  // Rejection from the bounding cube.
  for (;;) {
    for (Eigen::Index i = 0; i < n; ++i) x(i) = 2.0 * uniform01(rng) - 1.0;
    if (x.squaredNorm() <= 1.0) return a_ + ball_radius_ * x;
  }
}

Eigen::VectorXd project(const Domain& domain, const Eigen::VectorXd& y) {
  return domain.project(y);
}

double bregman(const Domain& domain, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (static_cast<std::size_t>(x.size()) != domain.dim() || x.size() != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "bregman arguments do not match the domain");
  }
  return (x - y).squaredNorm();
}

PointEval evaluate(const StateOracle& oracle, const Eigen::VectorXd& x) {
  PointEval e;
  e.f = oracle.f(x);
  e.grad_f = oracle.grad_f(x);
  const auto m = static_cast<Eigen::Index>(oracle.g.size());
  e.g.resize(m);
  e.grad_g.resize(m, x.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    e.g(i) = oracle.g[static_cast<std::size_t>(i)](x);
    e.grad_g.row(i) = oracle.grad_g[static_cast<std::size_t>(i)](x).transpose();
  }
  return e;
}

ProblemInstance::ProblemInstance(std::string name, Domain domain, std::vector<StateOracle> oracles,
                                 TransitionMatrix chain, Eigen::VectorXd initial_point)
    : name_(std::move(name)),
      domain_(std::move(domain)),
      oracles_(std::move(oracles)),
      chain_(std::move(chain)),
      x1_(std::move(initial_point)) {
  if (oracles_.empty()) throw Error(ErrorCode::kInvalidArgument, "instance needs at least one state");
  if (oracles_.size() != chain_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one oracle per chain state is required");
  }
  n_constraints_ = oracles_.front().g.size();
  for (const StateOracle& o : oracles_) {
    if (!o.f || !o.grad_f) throw Error(ErrorCode::kInvalidArgument, "state oracle is missing f");
    if (o.g.size() != n_constraints_ || o.grad_g.size() != n_constraints_) {
      throw Error(ErrorCode::kDimensionMismatch, "all states need the same constraints and gradients");
    }
  }
  if (static_cast<std::size_t>(x1_.size()) != domain_.dim() || !domain_.contains(x1_)) {
    throw Error(ErrorCode::kInvalidArgument, "initial point must lie in the domain");
  }
  mu_ = stationary_distribution(chain_);
}

void ProblemInstance::set_slater(SlaterPoint s) {
  const BarEval e = bar_eval(*this, s.x_hat);
  if (!(s.epsilon > 0.0) || (e.g.array() > -s.epsilon).any()) {
    throw Error(ErrorCode::kInvalidArgument, "Slater point does not satisfy bar g <= -epsilon");
  }
  slater_ = std::move(s);
}

ProblemInstance ProblemInstance::with_chain(TransitionMatrix chain) const {
  ProblemInstance copy(name_, domain_, oracles_, std::move(chain), x1_);
  copy.lipschitz_ = lipschitz_;
  if (slater_) copy.set_slater(*slater_);
  return copy;
}

BarEval bar_eval(const ProblemInstance& instance, const Eigen::VectorXd& x) {
  BarEval out;
  out.g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(instance.n_constraints()));
  const Eigen::VectorXd& mu = instance.stationary();
  for (std::size_t s = 0; s < instance.n_states(); ++s) {
    const double w = mu(static_cast<Eigen::Index>(s));
    if (w == 0.0) continue;
    const StateOracle& o = instance.oracle(s);
    out.f += w * o.f(x);
    for (std::size_t i = 0; i < instance.n_constraints(); ++i) {
      out.g(static_cast<Eigen::Index>(i)) += w * o.g[i](x);
    }
  }
  return out;
}

PointEval bar_eval_with_gradients(const ProblemInstance& instance, const Eigen::VectorXd& x) {
  const auto m = static_cast<Eigen::Index>(instance.n_constraints());
  const auto d = static_cast<Eigen::Index>(instance.dim());
  PointEval out;
  out.grad_f = Eigen::VectorXd::Zero(d);
  out.g = Eigen::VectorXd::Zero(m);
  out.grad_g = Eigen::MatrixXd::Zero(m, d);
  const Eigen::VectorXd& mu = instance.stationary();
  for (std::size_t s = 0; s < instance.n_states(); ++s) {
    const double w = mu(static_cast<Eigen::Index>(s));
    if (w == 0.0) continue;
    const PointEval e = evaluate(instance.oracle(s), x);
    out.f += w * e.f;
    out.grad_f += w * e.grad_f;
    out.g += w * e.g;
    out.grad_g += w * e.grad_g;
  }
  return out;
}

LipschitzBounds estimate_lipschitz(const ProblemInstance& instance, std::size_t samples,
                                   std::uint64_t seed) {
  if (samples == 0) throw Error(ErrorCode::kInvalidArgument, "estimate_lipschitz needs samples >= 1");
  Rng rng(child_seed(seed, SeedStream::kLipschitz));
  LipschitzBounds b;
  for (std::size_t k = 0; k < samples; ++k) {
    const Eigen::VectorXd x = instance.domain().sample(rng);
    for (std::size_t s = 0; s < instance.n_states(); ++s) {
      const PointEval e = evaluate(instance.oracle(s), x);
      b.F = std::max(b.F, e.grad_f.norm());
      for (Eigen::Index i = 0; i < e.g.size(); ++i) {
        b.G = std::max(b.G, e.grad_g.row(i).norm());
        b.H = std::max(b.H, std::abs(e.g(i)));
      }
    }
  }
  b.F *= kLipschitzSafetyFactor;
  b.G *= kLipschitzSafetyFactor;
  b.H *= kLipschitzSafetyFactor;
  return b;
}

}  // namespace markov_dpp

#include "markov_dpp/chain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "markov_dpp/error.hpp"

namespace markov_dpp {

namespace {

void check_stochastic(const Eigen::MatrixXd& p) {
  const ChainDiagnosis d = diagnose(p);
  if (!d.stochastic) {
    std::ostringstream msg;
    msg << "row " << *d.bad_row << " is not a probability vector (error "
        << d.worst_row_error << ")";
    throw Error(ErrorCode::kNonStochasticRow, msg.str());
  }
}

}  // namespace

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd p) : p_(std::move(p)) {
  if (p_.rows() == 0 || p_.rows() != p_.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "transition matrix must be square and non-empty");
  }
  check_stochastic(p_);
}

TransitionMatrix TransitionMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != n) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                      " entries, expected " + std::to_string(n));
    }
    for (Eigen::Index j = 0; j < n; ++j) p(i, j) = rows[i][j];
  }
  return TransitionMatrix(std::move(p));
}

TransitionMatrix TransitionMatrix::symmetric_three_state(double p) {
  if (!(p >= 0.0 && p <= 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "symmetric 3-state chain needs 0 <= p <= 1/2");
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(3, 3, p);
  m.diagonal().setConstant(1.0 - 2.0 * p);
  return TransitionMatrix(std::move(m));
}

std::optional<double> TransitionMatrix::symmetric_three_state_parameter() const {
  if (size() != 3) return std::nullopt;
  const double p = p_(0, 1);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      const double expected = i == j ? 1.0 - 2.0 * p : p;
      if (std::abs(p_(i, j) - expected) > 1e-12) return std::nullopt;
    }
  }
  return p;
}

ChainDiagnosis diagnose(const Eigen::MatrixXd& p) {
  ChainDiagnosis d;
  const Eigen::Index n = p.rows();
  if (n == 0 || p.cols() != n) {
    d.stochastic = false;
    d.bad_row = 0;
    return d;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    double err = std::abs(p.row(i).sum() - 1.0);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double v = p(i, j);
      if (!std::isfinite(v)) err = std::numeric_limits<double>::infinity();
      if (v < 0.0) err = std::max(err, -v);
      if (v > 1.0) err = std::max(err, v - 1.0);
    }
    if (err > kRowSumTolerance) {
      d.stochastic = false;
      if (!d.bad_row) d.bad_row = static_cast<std::size_t>(i);
    }
    d.worst_row_error = std::max(d.worst_row_error, err);
  }
  if (!d.stochastic) return d;

  // Boolean powers of the support pattern; a primitive matrix has a strictly
  // positive power no later than (n-1)^2 + 1 <= n^2.
  using Pattern = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const Pattern base = (p.array() > 0.0).cast<int>().matrix();
  Pattern current = base;
  const auto limit = static_cast<std::size_t>(n * n);
  for (std::size_t k = 1; k <= limit; ++k) {
    if ((current.array() > 0).all()) {
      d.ergodic = true;
      d.positive_power = k;
      break;
    }
    current = ((current * base).array() > 0).cast<int>().matrix();
  }
  return d;
}

void validate(const Eigen::MatrixXd& p) {
  check_stochastic(p);
  if (!diagnose(p).ergodic) {
    throw Error(ErrorCode::kNotErgodic, "no power P^k with k <= n^2 is strictly positive");
  }
}

void validate(const TransitionMatrix& p) { validate(p.matrix()); }

Eigen::VectorXd stationary_distribution(const TransitionMatrix& p) {
  validate(p);
  const auto n = static_cast<Eigen::Index>(p.size());
  Eigen::RowVectorXd mu = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  for (std::size_t it = 0; it < kStationaryMaxIterations; ++it) {
    Eigen::RowVectorXd next = mu * p.matrix();
    next /= next.sum();
    const double change = (next - mu).cwiseAbs().maxCoeff();
    mu = std::move(next);
    if (change < kStationaryTolerance) return mu.transpose();
  }
  throw Error(ErrorCode::kNoConvergence,
              "power iteration did not reach a fixed point within the iteration budget");
}

double tv_distance(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  if (p.size() != q.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "total variation of vectors of different length");
  }
  return 0.5 * (p - q).cwiseAbs().sum();
}

Eigen::MatrixXd matrix_power(const Eigen::MatrixXd& p, std::int64_t t) {
  if (t < 0) throw Error(ErrorCode::kInvalidArgument, "negative matrix power");
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(p.rows(), p.cols());
  Eigen::MatrixXd base = p;
  while (t > 0) {
    if (t & 1) result = result * base;
    t >>= 1;
    if (t > 0) base = base * base;
  }
  return result;
}

double d_mix(const TransitionMatrix& p, const Eigen::VectorXd& mu, std::int64_t t) {
  const Eigen::MatrixXd pt = matrix_power(p.matrix(), t);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < pt.rows(); ++i) {
    worst = std::max(worst, tv_distance(pt.row(i).transpose(), mu));
  }
  return worst;
}

double d_mix(const TransitionMatrix& p, std::int64_t t) {
  return d_mix(p, stationary_distribution(p), t);
}

std::int64_t mixing_time(const TransitionMatrix& p, double eps, std::int64_t cap) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mixing_time needs 0 < eps < 1");
  }
  const Eigen::VectorXd mu = stationary_distribution(p);
  std::int64_t hi = 1;
  while (d_mix(p, mu, hi) > eps) {
    if (hi >= cap) {
      throw Error(ErrorCode::kBudgetExceeded,
                  "mixing time exceeds the cap of " + std::to_string(cap) + " steps");
    }
    hi = std::min(hi * 2, cap);
  }
  // Invariant: d_mix(hi) <= eps and d_mix(lo) > eps (lo = 0 is a sentinel).
  std::int64_t lo = hi / 2;
  if (lo >= 1 && d_mix(p, mu, lo) <= eps) lo = 0;
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    if (d_mix(p, mu, mid) <= eps) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

bool is_reversible(const TransitionMatrix& p, const Eigen::VectorXd& mu, double tol) {
  const auto n = static_cast<Eigen::Index>(p.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(mu(i) * p(i, j) - mu(j) * p(j, i)) > tol) return false;
    }
  }
  return true;
}

SpectralBounds spectral_mixing_bounds(const TransitionMatrix& p) {
  const Eigen::VectorXd mu = stationary_distribution(p);
  if (!is_reversible(p, mu)) {
    throw Error(ErrorCode::kNotReversible, "detailed balance fails; spectral bounds need a reversible chain");
  }
  if (p.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "spectral bounds need at least two states");
  }
  // D^{1/2} P D^{-1/2} is symmetric for a reversible chain and shares P's spectrum.
  const Eigen::VectorXd s = mu.cwiseSqrt();
  const Eigen::MatrixXd a = s.asDiagonal() * p.matrix() * s.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = solver.eigenvalues();  // ascending
  const Eigen::Index n = ev.size();

  SpectralBounds b;
  b.lambda2 = ev(n - 2);
  b.lambda_min = ev(0);
  b.mu_min = mu.minCoeff();
  const double lambda_star = std::max(std::abs(b.lambda2), std::abs(b.lambda_min));
  const double gap = 1.0 - lambda_star;
  b.lower = std::abs(b.lambda2) / gap * std::log(2.0);
  b.upper = std::log(4.0 / b.mu_min) / gap;
  return b;
}

MixingReport mixing_report(const TransitionMatrix& p, std::int64_t horizon, double eps) {
  if (horizon < 2) throw Error(ErrorCode::kInvalidArgument, "horizon must be at least 2");
  MixingReport r;
  r.horizon = horizon;
  r.eps = eps;
  r.tau_mix = mixing_time(p, 0.25);
  r.tau_of_T = mixing_time(p, 1.0 / static_cast<double>(horizon));
  r.tau_eps = mixing_time(p, eps);
  try {
    const SpectralBounds b = spectral_mixing_bounds(p);
    r.spectral_lower = b.lower;
    r.spectral_upper = b.upper;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotReversible && e.code() != ErrorCode::kInvalidArgument) throw;
  }
  if (auto q = p.symmetric_three_state_parameter(); q && *q > 0.0) {
    r.approx = 1.0 / (3.0 * *q);
  }
  return r;
}

std::size_t sample_categorical(Rng& rng, const Eigen::VectorXd& probabilities) {
  const double u = uniform01(rng);
  double acc = 0.0;
  const auto n = static_cast<std::size_t>(probabilities.size());
  for (std::size_t i = 0; i < n; ++i) {
    acc += probabilities(static_cast<Eigen::Index>(i));
    if (u < acc) return i;
  }
  // Round-off in the cumulative sum: return the last state with mass.
  for (std::size_t i = n; i-- > 0;) {
    if (probabilities(static_cast<Eigen::Index>(i)) > 0.0) return i;
  }
  return n - 1;
}

ChainSampler::ChainSampler(TransitionMatrix matrix, std::uint64_t seed, std::size_t initial_state)
    : matrix_(std::move(matrix)), rng_(child_seed(seed, SeedStream::kChain)), current_(initial_state) {
  if (initial_state >= matrix_.size()) {
    throw Error(ErrorCode::kInvalidArgument, "initial state out of range");
  }
  cumulative_ = matrix_.matrix();
  for (Eigen::Index i = 0; i < cumulative_.rows(); ++i) {
    for (Eigen::Index j = 1; j < cumulative_.cols(); ++j) cumulative_(i, j) += cumulative_(i, j - 1);
  }
}

ChainSampler ChainSampler::from_distribution(TransitionMatrix matrix, std::uint64_t seed,
                                             const Eigen::VectorXd& initial) {
  Rng init(child_seed(seed, SeedStream::kInitialState));
  const std::size_t s = sample_categorical(init, initial);
  return ChainSampler(std::move(matrix), seed, s);
}

std::size_t ChainSampler::step() {
  const double u = uniform01(rng_);
  const auto row = static_cast<Eigen::Index>(current_);
  const Eigen::Index n = cumulative_.cols();
  Eigen::Index next = n - 1;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (u < cumulative_(row, j)) {
      next = j;
      break;
    }
  }
  // Guard against landing on a zero-probability tail state after round-off.
  while (next > 0 && matrix_(current_, static_cast<std::size_t>(next)) == 0.0) --next;
  current_ = static_cast<std::size_t>(next);
  return current_;
}

std::size_t ReplaySource::next_state() {
  if (position_ >= states_->size()) {
    throw Error(ErrorCode::kBudgetExceeded, "replayed state sequence exhausted");
  }
  return (*states_)[position_++];
}

}  // namespace markov_dpp

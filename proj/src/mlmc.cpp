#include "markov_dpp/mlmc.hpp"

#include <bit>
#include <cmath>
#include <map>

#include "markov_dpp/error.hpp"

namespace markov_dpp {

int max_level(std::size_t horizon) {
  if (horizon < 1) throw Error(ErrorCode::kInvalidArgument, "horizon must be positive");
  // Exact integer comparison of 2^j against T^2 (T^2 can exceed 64 bits).
  const unsigned __int128 t2 = static_cast<unsigned __int128>(horizon) * horizon;
  int j = 0;
  while (j < 126 && (static_cast<unsigned __int128>(1) << (j + 1)) <= t2) ++j;
  return j;
}

LevelDraw draw_level(Rng& rng, std::size_t horizon, const MlmcOptions& options) {
  if (horizon < 2) throw Error(ErrorCode::kInvalidArgument, "MLMC needs a horizon T >= 2");
  if (horizon >= (std::size_t{1} << 31)) {
    throw Error(ErrorCode::kInvalidArgument, "MLMC horizon must be below 2^31");
  }
  if (options.cap && (*options.cap < 1 || (*options.cap & (*options.cap - 1)) != 0)) {
    throw Error(ErrorCode::kInvalidArgument, "MLMC sample cap must be a power of two");
  }
  // Trailing zeros of a uniform 64-bit word: P(tz = k) = 2^-(k+1).
  std::uint64_t word = rng();
  int level = 1;
  while (word == 0) {
    level += 64;
    word = rng();
  }
  level += std::countr_zero(word);

  LevelDraw d;
  d.level = level;
  d.samples = level <= max_level(horizon) ? (std::size_t{1} << level) : 1;
  if (options.cap && d.samples > *options.cap) {
    d.truncated = true;
    d.samples = options.rule == TruncationRule::kClamp ? *options.cap : 1;
  }
  return d;
}

std::vector<double> mlmc_weights(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "MLMC draw needs at least one sample");
  if (n == 1) return {1.0};
  std::vector<double> w(n, 1.0);
  w[0] = 0.0;
  for (std::size_t k = 1; k < n / 2; ++k) w[k] = -1.0;
  return w;
}

StepFunction::StepFunction(const ProblemInstance* instance, MlmcDraw draw)
    : instance_(instance), draw_(std::move(draw)) {
  if (draw_.states.size() != draw_.samples || draw_.samples == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "MLMC draw has inconsistent sample count");
  }
  if ((draw_.samples & (draw_.samples - 1)) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "MLMC sample count must be a power of two");
  }
}

PointEval StepFunction::evaluate(const Eigen::VectorXd& x) const {
  if (draw_.samples == 1) return markov_dpp::evaluate(instance_->oracle(draw_.states[0]), x);

  std::map<std::size_t, PointEval> cache;
  for (std::size_t s : draw_.states) {
    if (!cache.count(s)) cache.emplace(s, markov_dpp::evaluate(instance_->oracle(s), x));
  }
  const std::size_t n = draw_.samples;
  std::vector<double> f(n);
  std::vector<Eigen::VectorXd> grad_f(n);
  std::vector<Eigen::VectorXd> g(n);
  std::vector<Eigen::MatrixXd> grad_g(n);
  for (std::size_t k = 0; k < n; ++k) {
    const PointEval& e = cache.at(draw_.states[k]);
    f[k] = e.f;
    grad_f[k] = e.grad_f;
    g[k] = e.g;
    grad_g[k] = e.grad_g;
  }
  PointEval out;
  out.f = mlmc_combine(f);
  out.grad_f = mlmc_combine(grad_f);
  out.g = mlmc_combine(g);
  out.grad_g = mlmc_combine(grad_g);
  return out;
}

double StepFunction::f(const Eigen::VectorXd& x) const {
  if (draw_.samples == 1) return instance_->oracle(draw_.states[0]).f(x);
  std::map<std::size_t, double> cache;
  std::vector<double> values(draw_.samples);
  for (std::size_t k = 0; k < draw_.samples; ++k) {
    const std::size_t s = draw_.states[k];
    auto it = cache.find(s);
    if (it == cache.end()) it = cache.emplace(s, instance_->oracle(s).f(x)).first;
    values[k] = it->second;
  }
  return mlmc_combine(values);
}

SampleSums StepFunction::sample_sums(const Eigen::VectorXd& x) const {
  std::map<std::size_t, std::pair<double, Eigen::VectorXd>> cache;
  SampleSums out;
  out.g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(instance_->n_constraints()));
  for (std::size_t s : draw_.states) {
    auto it = cache.find(s);
    if (it == cache.end()) {
      const StateOracle& o = instance_->oracle(s);
      Eigen::VectorXd g(out.g.size());
      for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = o.g[static_cast<std::size_t>(i)](x);
      it = cache.emplace(s, std::make_pair(o.f(x), std::move(g))).first;
    }
    out.f += it->second.first;
    out.g += it->second.second;
  }
  return out;
}

StepFunction mlmc_estimate(const ProblemInstance& instance, StateSource& source, Rng& level_rng,
                           std::size_t horizon, const MlmcOptions& options) {
  const LevelDraw level = draw_level(level_rng, horizon, options);
  MlmcDraw draw;
  draw.level = level.level;
  draw.samples = level.samples;
  draw.truncated = level.truncated;
  draw.states.reserve(level.samples);
  for (std::size_t k = 0; k < level.samples; ++k) draw.states.push_back(source.next_state());
  return StepFunction(&instance, std::move(draw));
}

StepFunction SingleSampleStream::next() {
  MlmcDraw draw;
  draw.states.push_back(source_->next_state());
  ++consumed_;
  return StepFunction(instance_, std::move(draw));
}

MlmcStream::MlmcStream(const ProblemInstance& instance, StateSource& source, std::uint64_t seed,
                       std::size_t horizon, MlmcOptions options)
    : instance_(&instance),
      source_(&source),
      level_rng_(child_seed(seed, SeedStream::kMlmcLevels)),
      horizon_(horizon),
      options_(options) {
  pending_ = draw_level(level_rng_, horizon_, options_);
}

StepFunction MlmcStream::next() {
  MlmcDraw draw;
  draw.level = pending_.level;
  draw.samples = pending_.samples;
  draw.truncated = pending_.truncated;
  draw.states.reserve(draw.samples);
  for (std::size_t k = 0; k < draw.samples; ++k) draw.states.push_back(source_->next_state());
  consumed_ += draw.samples;
  pending_ = draw_level(level_rng_, horizon_, options_);
  return StepFunction(instance_, std::move(draw));
}

}  // namespace markov_dpp

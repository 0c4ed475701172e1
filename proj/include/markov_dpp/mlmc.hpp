#ifndef MARKOV_DPP_MLMC_HPP
#define MARKOV_DPP_MLMC_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "markov_dpp/chain.hpp"
#include "markov_dpp/problem.hpp"
#include "markov_dpp/random.hpp"

namespace markov_dpp {

// How a level above the per-iteration sample cap is handled.
//   kFallbackToOne: N = 1, the same rule the T^2 bound uses, so the capped
//                   estimator stays unbiased for the 2^{j_cap} average.
//   kClamp:         N = cap.
enum class TruncationRule { kFallbackToOne, kClamp };

struct MlmcOptions {
  std::optional<std::size_t> cap;  // experiments use 2^4
  TruncationRule rule = TruncationRule::kFallbackToOne;
};

struct LevelDraw {
  int level = 0;            // J >= 1
  std::size_t samples = 1;  // N
  bool truncated = false;   // the cap changed N
};

// j_max = max{ j : 2^j <= T^2 } = floor(2 log2 T).
int max_level(std::size_t horizon);

// J ~ Geom(1/2) on {1, 2, ...}, i.e. P(J = j) = 2^-j, and N = 2^J when
// 2^J <= T^2, else N = 1; then the optional cap.
LevelDraw draw_level(Rng& rng, std::size_t horizon, const MlmcOptions& options = {});

// Coefficients w with sum_k w_k v_k = v_1 + N (avg_N(v) - avg_{N/2}(v)):
// w_1 = 0, w_k = -1 for 2 <= k <= N/2, w_k = +1 for k > N/2; N = 1 gives {1}.
std::vector<double> mlmc_weights(std::size_t n);

struct MlmcDraw {
  int level = 0;  // 0 for a plain single-sample step
  std::size_t samples = 1;
  bool truncated = false;
  std::vector<std::size_t> states;

  std::vector<double> weights() const { return mlmc_weights(samples); }
};

// Per-sample totals sum_j f(x, s_j) and sum_j g_i(x, s_j).
struct SampleSums {
  double f = 0.0;
  Eigen::VectorXd g;
};

// The function pair (f_t, g_t) observed at one step. Keeps the drawn states
// so it can be evaluated at any point, not only at x_t. For a single sample it
// is just the state oracle; otherwise the MLMC estimator
//   f_t = f^1 + N (f^N - f^{N/2})
// evaluated literally from partial averages in sample order.
class StepFunction {
 public:
  StepFunction(const ProblemInstance* instance, MlmcDraw draw);

  PointEval evaluate(const Eigen::VectorXd& x) const;
  double f(const Eigen::VectorXd& x) const;
  SampleSums sample_sums(const Eigen::VectorXd& x) const;

  const MlmcDraw& draw() const { return draw_; }
  std::size_t samples() const { return draw_.samples; }

 private:
  const ProblemInstance* instance_;
  MlmcDraw draw_;
};

using MlmcFunctionPair = StepFunction;

// Literal estimator combination of per-sample values, shared by scalars,
// vectors and matrices so every quantity uses the same grouping.
template <typename T>
T mlmc_combine(const std::vector<T>& values) {
  const std::size_t n = values.size();
  if (n == 1) return values.front();
  const std::size_t half = n / 2;
  T head = values[0];
  for (std::size_t k = 1; k < half; ++k) head = head + values[k];
  T all = head;
  for (std::size_t k = half; k < n; ++k) all = all + values[k];
  const double nd = static_cast<double>(n);
  return values[0] + nd * (all / nd - head / static_cast<double>(half));
}

// Draws a level, advances `source` exactly N steps, and returns the estimator
// over those consecutive states.
StepFunction mlmc_estimate(const ProblemInstance& instance, StateSource& source, Rng& level_rng,
                           std::size_t horizon, const MlmcOptions& options = {});

// Per-step source of observed functions for the solver.
class DataStream {
 public:
  virtual ~DataStream() = default;
  virtual StepFunction next() = 0;
  // Samples the next call to next() will consume.
  virtual std::size_t pending_samples() const { return 1; }
  std::size_t samples_consumed() const { return consumed_; }

 protected:
  std::size_t consumed_ = 0;
};

// One chain transition per step (the known-mixing-time path).
class SingleSampleStream : public DataStream {
 public:
  SingleSampleStream(const ProblemInstance& instance, StateSource& source)
      : instance_(&instance), source_(&source) {}
  StepFunction next() override;

 private:
  const ProblemInstance* instance_;
  StateSource* source_;
};

// MLMC estimators over consecutive samples of one continuing chain.
class MlmcStream : public DataStream {
 public:
  MlmcStream(const ProblemInstance& instance, StateSource& source, std::uint64_t seed,
             std::size_t horizon, MlmcOptions options = {});
  StepFunction next() override;
  std::size_t pending_samples() const override { return pending_.samples; }

  // Level of the next draw without consuming it (sample-budget accounting).
  const LevelDraw& peek() const { return pending_; }

 private:
  const ProblemInstance* instance_;
  StateSource* source_;
  Rng level_rng_;
  std::size_t horizon_;
  MlmcOptions options_;
  LevelDraw pending_;
};

}  // namespace markov_dpp

#endif  // MARKOV_DPP_MLMC_HPP

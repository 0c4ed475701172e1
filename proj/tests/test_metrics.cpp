#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "markov_dpp/error.hpp"
#include "markov_dpp/instances.hpp"
#include "markov_dpp/metrics.hpp"
#include "markov_dpp/solver.hpp"
#include "support.hpp"

namespace markov_dpp {
namespace {

ProblemInstance single_state(std::size_t dim, double lo, double hi, StateOracle o,
                             Eigen::VectorXd x1) {
  return ProblemInstance("single", Domain::box(dim, lo, hi), {std::move(o)},
                         TransitionMatrix::from_rows({{1.0}}), std::move(x1));
}

// f = ||x||^2, g = constant.
StateOracle squared_norm_oracle(double g_value) {
  StateOracle o;
  o.f = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
  o.grad_f = [](const Eigen::VectorXd& x) -> Eigen::VectorXd { return 2 * x; };
  o.g.push_back([g_value](const Eigen::VectorXd&) { return g_value; });
  o.grad_g.push_back([](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return Eigen::VectorXd::Zero(x.size());
  });
  return o;
}

// f = x, g = -x - 0.5.
StateOracle linear_oracle() {
  StateOracle o;
  o.f = [](const Eigen::VectorXd& x) { return x(0); };
  o.grad_f = [](const Eigen::VectorXd&) -> Eigen::VectorXd { return Eigen::VectorXd::Ones(1); };
  o.g.push_back([](const Eigen::VectorXd& x) { return -x(0) - 0.5; });
  o.grad_g.push_back([](const Eigen::VectorXd&) -> Eigen::VectorXd {
    return -Eigen::VectorXd::Ones(1);
  });
  return o;
}

Trajectory trajectory_with_g(const std::vector<double>& g) {
  Trajectory traj;
  for (std::size_t k = 0; k < g.size(); ++k) {
    StepRecord s;
    s.t = k + 1;
    s.x = Eigen::VectorXd::Zero(1);
    s.Q = Eigen::VectorXd::Zero(1);
    s.g_at_x = Eigen::VectorXd::Constant(1, g[k]);
    traj.steps.push_back(s);
  }
  traj.x_final = Eigen::VectorXd::Zero(1);
  traj.Q_final = Eigen::VectorXd::Zero(1);
  return traj;
}

TEST(Regret, ConstantTrajectory) {
  const ProblemInstance instance =
      single_state(2, -1, 1, squared_norm_oracle(-1.0), Eigen::VectorXd::Zero(2));
  const Trajectory traj = run_on_chain(instance, EdppSchedule{1.0, 0.5}, 20, 1);
  for (const StepRecord& s : traj.steps) EXPECT_EQ(s.x, Eigen::VectorXd::Zero(2));
  EXPECT_EQ(regret(instance, traj, Eigen::VectorXd::Zero(2), true), 0.0);
}

TEST(Regret, SingleStep) {
  const ProblemInstance instance =
      single_state(1, -5, 5, linear_oracle(), Eigen::VectorXd::Constant(1, 3.0));
  const Trajectory traj = run_on_chain(instance, EdppSchedule{1.0, 0.5}, 1, 1);
  EXPECT_DOUBLE_EQ(regret(instance, traj, Eigen::VectorXd::Constant(1, 1.0)), 2.0);
}

TEST(Regret, BenchmarkNeedsFeasibleComparator) {
  const ProblemInstance instance =
      single_state(1, -5, 5, linear_oracle(), Eigen::VectorXd::Constant(1, 3.0));
  const Trajectory traj = run_on_chain(instance, EdppSchedule{1.0, 0.5}, 5, 1);
  EXPECT_NO_THROW(regret(instance, traj, Eigen::VectorXd::Constant(1, -0.2), true));
  try {
    regret(instance, traj, Eigen::VectorXd::Constant(1, -1.0), true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInfeasibleComparator);
  }
  EXPECT_NO_THROW(regret(instance, traj, Eigen::VectorXd::Constant(1, -1.0), false));
}

TEST(Regret, MlmcRunsReevaluateEstimators) {
  const ProblemInstance instance = synthetic_instance(0.1);
  const Trajectory traj =
      run_on_chain(instance, MdppSchedule{0.5, 1.0, instance.domain().bregman_radius()}, 300, 3);
  const Eigen::VectorXd z = kSyntheticOptimum;
  double direct = 0.0;
  double per_sample = 0.0;
  for (const StepRecord& s : traj.steps) {
    const StepFunction fn = step_function(instance, s);
    direct += fn.f(s.x) - fn.f(z);
    for (std::size_t st : s.states) per_sample += instance.oracle(st).f(s.x) - instance.oracle(st).f(z);
  }
  EXPECT_NEAR(regret(instance, traj, z), direct, 1e-9);
  EXPECT_NEAR(per_sample_regret(instance, traj, z), per_sample, 1e-9);
  const auto cumulative = cumulative_regret(instance, traj, z);
  EXPECT_NEAR(cumulative.back(), direct, 1e-9);
}

TEST(Regret, IidGrowthBound) {
  const ProblemInstance instance = make_instance("synth-iid");
  const Eigen::VectorXd z = kSyntheticOptimum;
  double short_total = 0.0;
  double long_total = 0.0;
  for (int seed = 0; seed < 5; ++seed) {
    short_total += regret(instance, run_on_chain(instance, EdppSchedule{1.0, 1.0 / 3.0}, 1000, seed), z);
    long_total += regret(instance, run_on_chain(instance, EdppSchedule{1.0, 1.0 / 3.0}, 4000, seed), z);
  }
  EXPECT_LE(long_total, std::pow(4.0, 2.0 / 3.0) * 1.5 * std::max(short_total, 1e-9));
}

TEST(Violation, Examples) {
  EXPECT_EQ(violation(trajectory_with_g({0.0, 0.0, 0.0}), 0), 0.0);
  EXPECT_NEAR(violation(trajectory_with_g({0.5, -0.2, 0.1}), 0), 0.4, 1e-15);
  const auto cum = cumulative_violation(trajectory_with_g({0.5, -0.2, 0.1}), 0);
  ASSERT_EQ(cum.size(), 3u);
  EXPECT_NEAR(cum[1], 0.3, 1e-15);
}

TEST(Violation, IidPerStepShrinks) {
  const ProblemInstance instance = make_instance("synth-iid");
  double short_rate = 0.0;
  double long_rate = 0.0;
  for (int seed = 0; seed < 5; ++seed) {
    short_rate += violation(run_on_chain(instance, EdppSchedule{1.0, 1.0 / 3.0}, 1000, seed), 0) / 1000;
    long_rate += violation(run_on_chain(instance, EdppSchedule{1.0, 1.0 / 3.0}, 4000, seed), 0) / 4000;
  }
  EXPECT_LT(std::abs(long_rate), std::abs(short_rate));
}

TEST(Reference, UnconstrainedQuadratic) {
  const ProblemInstance instance =
      single_state(2, -1, 1, squared_norm_oracle(-1.0), Eigen::Vector2d(0.5, 0.5));
  for (ReferenceMethod method : {ReferenceMethod::kDescent, ReferenceMethod::kGrid}) {
    const ReferenceSolution ref = reference_solution(instance, {.method = method});
    EXPECT_LT(ref.x_star.norm(), 1e-6) << reference_method_name(method);
    EXPECT_NEAR(ref.f_bar_star, 0.0, 1e-10);
  }
}

TEST(Reference, ConstraintBoundary) {
  const ProblemInstance instance =
      single_state(1, -1, 1, linear_oracle(), Eigen::VectorXd::Constant(1, 0.5));
  for (ReferenceMethod method : {ReferenceMethod::kDescent, ReferenceMethod::kGrid}) {
    const ReferenceSolution ref = reference_solution(instance, {.method = method});
    EXPECT_NEAR(ref.x_star(0), -0.5, 1e-6) << reference_method_name(method);
    EXPECT_LE(ref.max_violation, kFeasibilityTolerance);
  }
}

TEST(Reference, SyntheticOptimum) {
  const ProblemInstance instance = synthetic_instance(0.1);
  for (ReferenceMethod method : {ReferenceMethod::kDescent, ReferenceMethod::kGrid}) {
    const ReferenceSolution ref = reference_solution(instance, {.method = method});
    EXPECT_LT((ref.x_star - kSyntheticOptimum).norm(), 1e-5) << reference_method_name(method);
    EXPECT_LE(ref.max_violation, kFeasibilityTolerance);
  }
}

TEST(Reference, RandomInstancesAgree) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const ProblemInstance instance = testing::random_instance(seed);
    const ReferenceSolution d = reference_solution(instance, {.method = ReferenceMethod::kDescent});
    const ReferenceSolution g = reference_solution(instance, {.method = ReferenceMethod::kGrid});
    EXPECT_LE(d.max_violation, kFeasibilityTolerance);
    EXPECT_LE(g.max_violation, kFeasibilityTolerance);
    EXPECT_NEAR(d.f_bar_star, g.f_bar_star, 1e-4) << seed;
  }
}

TEST(Reference, NoFeasiblePoint) {
  const ProblemInstance instance =
      single_state(2, -1, 1, squared_norm_oracle(1.0), Eigen::Vector2d(0.0, 0.0));
  for (ReferenceMethod method : {ReferenceMethod::kDescent, ReferenceMethod::kGrid}) {
    try {
      reference_solution(instance, {.method = method});
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kNoFeasiblePoint);
    }
  }
}

TEST(Gap, Examples) {
  const ProblemInstance instance =
      single_state(2, -1, 1, squared_norm_oracle(-1.0), Eigen::Vector2d(0.5, 0.5));
  const ReferenceSolution ref = reference_solution(instance);
  EXPECT_EQ(gap(instance, ref.x_star, ref), 0.0);
  EXPECT_NEAR(gap(instance, Eigen::Vector2d(1, 0), ref), 1.0, 1e-10);
}

TEST(Gap, ConvexAlongSegments) {
  const ProblemInstance instance = synthetic_instance(0.1);
  const ReferenceSolution ref = reference_solution(instance);
  EXPECT_EQ(gap(instance, ref.x_star, ref), 0.0);
  Rng rng(4);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd a = instance.domain().sample(rng);
    const Eigen::VectorXd b = instance.domain().sample(rng);
    for (double lambda : {0.25, 0.5, 0.75}) {
      EXPECT_LE(gap(instance, lambda * a + (1 - lambda) * b, ref),
                lambda * gap(instance, a, ref) + (1 - lambda) * gap(instance, b, ref) + 1e-12);
    }
  }
}

TEST(Infeasibility, Examples) {
  const ProblemInstance instance = synthetic_instance(0.1);
  const auto& slater = *instance.slater();
  EXPECT_LE(infeasibility(instance, slater.x_hat)(0), -slater.epsilon);

  StateOracle o = squared_norm_oracle(0.0);
  o.g[0] = [](const Eigen::VectorXd& x) { return x(0) - 0.5; };
  const ProblemInstance line = single_state(1, -1, 1, o, Eigen::VectorXd::Zero(1));
  EXPECT_NEAR(infeasibility(line, Eigen::VectorXd::Constant(1, 0.7))(0), 0.2, 1e-15);
}

TEST(Csv, RecomputationIdentities) {
  const ProblemInstance instance = synthetic_instance(0.1);
  const Trajectory traj =
      run_on_chain(instance, MdppSchedule{0.5, 1.0, instance.domain().bregman_radius()}, 400, 12);
  std::stringstream ss;
  write_trajectory_csv(ss, instance, traj, Eigen::VectorXd(kSyntheticOptimum));
  const CsvTable table = read_csv(ss);
  ASSERT_EQ(table.rows.size(), traj.length());

  const std::size_t g_col = table.column("g_0_at_xt");
  const std::size_t cum_col = table.column("cum_violation_0");
  const std::size_t samples_col = table.column("samples");
  const std::size_t n_col = table.column("N_t");
  double g_sum = 0.0;
  double samples = 0.0;
  Eigen::Vector2d x_sum = Eigen::Vector2d::Zero();
  for (const auto& row : table.rows) {
    g_sum += row[g_col];
    samples += row[n_col];
    EXPECT_EQ(row[cum_col], g_sum);
    EXPECT_EQ(row[samples_col], samples);
    x_sum += Eigen::Vector2d(row[table.column("x_0")], row[table.column("x_1")]);
  }
  EXPECT_EQ(g_sum, violation(traj, 0));
  EXPECT_EQ(static_cast<std::size_t>(samples), traj.samples_consumed);
  EXPECT_LT((x_sum / static_cast<double>(table.rows.size()) - average_iterate(traj)).norm(), 1e-12);
  EXPECT_NEAR(table.rows.back()[table.column("cum_regret")], regret(instance, traj, kSyntheticOptimum),
              1e-12);
  // Shortest round-trip formatting keeps every value exact.
  for (std::size_t r = 0; r < traj.length(); ++r) {
    EXPECT_EQ(table.rows[r][table.column("x_0")], traj.steps[r].x(0));
    EXPECT_EQ(table.rows[r][table.column("V_t")], traj.steps[r].V);
  }
  EXPECT_THROW(table.column("missing"), Error);
}

TEST(Csv, NoComparatorColumnWithoutComparator) {
  const ProblemInstance instance = synthetic_instance(0.1);
  const Trajectory traj = run_on_chain(instance, EdppSchedule{}, 3, 1);
  std::stringstream ss;
  write_trajectory_csv(ss, instance, traj);
  const CsvTable table = read_csv(ss);
  EXPECT_THROW(table.column("cum_regret"), Error);
  EXPECT_EQ(table.rows.size(), 3u);
}

TEST(Summary, JsonRoundTrip) {
  const ProblemInstance instance = synthetic_instance(0.1);
  const ReferenceSolution ref = reference_solution(instance);
  const Trajectory traj = run_on_chain(instance, EdppSchedule{3.0, 0.5}, 200, 9);
  RunSummary s = summarize(instance, traj, ref);
  s.config = {{"schedule", "edpp"}, {"T", 200}};
  s.version = "test";
  s.tau_mix = 3.0;
  const RunSummary back = summary_from_json(nlohmann::json::parse(to_json(s).dump()));
  EXPECT_EQ(back.final_gap, s.final_gap);
  EXPECT_EQ(back.final_infeasibility, s.final_infeasibility);
  EXPECT_EQ(back.regret, s.regret);
  EXPECT_EQ(back.violation, s.violation);
  EXPECT_EQ(back.seed, s.seed);
  EXPECT_EQ(back.iterations, 200u);
  EXPECT_EQ(back.config, s.config);
  EXPECT_EQ(to_json(back), to_json(s));
  EXPECT_NEAR(s.final_gap, gap(instance, average_iterate(traj), ref), 0.0);
}

TEST(SumBounds, SqrtSum) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x(1 + rng() % 200);
    for (double& v : x) v = uniform01(rng) < 0.1 ? 0.0 : 10.0 * uniform01(rng);
    const SumBound b = sqrt_sum_bound(x);
    EXPECT_LE(b.lhs, b.rhs * (1 + 1e-12));
  }
  // x = (1, 3): 1/1 + 3/2 = 2.5 <= 2 * 2.
  const SumBound b = sqrt_sum_bound({1.0, 3.0});
  EXPECT_DOUBLE_EQ(b.lhs, 2.5);
  EXPECT_DOUBLE_EQ(b.rhs, 4.0);
}

TEST(SumBounds, PowerSum) {
  const SumBound b = power_sum_bound(3, 1.0);
  EXPECT_DOUBLE_EQ(b.lhs, 6.0);
  EXPECT_DOUBLE_EQ(b.rhs, 7.5);
  for (std::size_t T : {1, 10, 1000}) {
    for (double q : {0.1, 0.5, 2.0}) {
      const SumBound s = power_sum_bound(T, q);
      EXPECT_LE(s.lhs, s.rhs * (1 + 1e-12));
    }
  }
  EXPECT_THROW(power_sum_bound(5, 0.0), Error);
}

TEST(SumBounds, LaggedPowerSum) {
  Rng rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const double C = 0.1 + 5.0 * uniform01(rng);
    const double delta = C * (0.01 + 0.99 * uniform01(rng));
    const double gamma = uniform01(rng) < 0.5 ? 0.05 + 0.9 * uniform01(rng) : 1.05 + uniform01(rng);
    std::vector<double> x(1 + rng() % 300);
    for (double& v : x) v = C * uniform01(rng);
    const SumBound b = lagged_power_sum_bound(x, delta, C, gamma);
    EXPECT_LE(b.lhs, b.rhs + 1e-12 * std::abs(b.rhs));
  }
  EXPECT_THROW(lagged_power_sum_bound({1.0}, 2.0, 1.0, 0.5), Error);
  EXPECT_THROW(lagged_power_sum_bound({1.0}, 0.5, 1.0, 1.0), Error);
}

}  // namespace
}  // namespace markov_dpp

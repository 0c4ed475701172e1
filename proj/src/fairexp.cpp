#include "markov_dpp/fairexp.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <thread>

#include <Eigen/Cholesky>

#include "markov_dpp/chain.hpp"
#include "markov_dpp/error.hpp"
#include "markov_dpp/random.hpp"
#include "markov_dpp/solver.hpp"

namespace markov_dpp {
namespace {

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) { return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m)); }

// 1 / (1 + exp(m))
double sigmoid_neg(double m) {
  if (m >= 0.0) {
    const double e = std::exp(-m);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(m));
}

struct StateData {
  Eigen::MatrixXd features;  // rows (x_1, x_2, 1)
  Eigen::VectorXd labels;
  Eigen::VectorXd constraint_grad;  // mean((z - z_bar) (x, 1))
};

std::vector<StateData> split_states(const FairDataset& data) {
  std::vector<StateData> out;
  for (std::size_t s = 0; s < data.n_states; ++s) {
    const std::vector<std::size_t> idx = data.members(s);
    if (idx.empty()) throw Error(ErrorCode::kInvalidArgument, "a state has no data points");
    const auto n = static_cast<Eigen::Index>(idx.size());
    StateData sd;
    sd.features.resize(n, 3);
    sd.labels.resize(n);
    sd.constraint_grad = Eigen::VectorXd::Zero(3);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto i = static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]);
      sd.features(r, 0) = data.points(i, 0);
      sd.features(r, 1) = data.points(i, 1);
      sd.features(r, 2) = 1.0;
      sd.labels(r) = data.labels(i);
      sd.constraint_grad += (data.sensitive(i) - data.z_bar) * sd.features.row(r).transpose();
    }
    sd.constraint_grad /= static_cast<double>(n);
    out.push_back(std::move(sd));
  }
  return out;
}

double tau_for(const FairExperimentConfig& config) {
  return config.tau_mix ? *config.tau_mix : 1.0 / (3.0 * config.p);
}

ParameterSchedule schedule_for(FairAlgorithm a, const FairExperimentConfig& config, double tau,
                               double delta, double R) {
  switch (a) {
    case FairAlgorithm::kEdppT:
      return EdppSchedule{tau, config.beta};
    case FairAlgorithm::kEdppFixed:
      return EdppFixedHorizonSchedule{tau, config.T, 0.5};
    case FairAlgorithm::kDppT:
      return EdppSchedule{1.0, config.beta};
    case FairAlgorithm::kDppFixed:
      return DppFixedSchedule{config.T};
    case FairAlgorithm::kMdpp:
      return MdppSchedule{config.beta, delta, R, false};
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown algorithm");
}

}  // namespace

DatasetSpec default_cluster_spec() {
  DatasetSpec spec;
  const Eigen::Matrix2d cov = 1.5 * Eigen::Matrix2d::Identity();
  const std::vector<Eigen::Vector2d> positive{{2.0, 2.0}, {4.0, 4.0}, {6.0, 2.0}};
  for (std::size_t s = 0; s < 3; ++s) {
    spec.clusters.push_back({s, 1, positive[s], cov});
    spec.clusters.push_back({s, -1, -positive[s], cov});
  }
  return spec;
}

std::vector<std::size_t> FairDataset::members(std::size_t s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (state[i] == s) out.push_back(i);
  }
  return out;
}

FairDataset generate_data(std::uint64_t seed, const DatasetSpec& spec) {
  if (spec.clusters.empty() || spec.points_per_cluster == 0) {
    throw Error(ErrorCode::kInvalidArgument, "dataset needs clusters and points");
  }
  Eigen::Vector2d pos_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d neg_mean = Eigen::Vector2d::Zero();
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::size_t n_states = 0;
  for (const ClusterSpec& c : spec.clusters) {
    if (c.label != 1 && c.label != -1) throw Error(ErrorCode::kInvalidArgument, "labels must be +-1");
    if (c.label == 1) {
      pos_mean += c.mean;
      ++n_pos;
    } else {
      neg_mean += c.mean;
      ++n_neg;
    }
    n_states = std::max(n_states, c.state + 1);
  }
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::kInvalidArgument, "both labels are required");
  Eigen::Vector2d direction = pos_mean / static_cast<double>(n_pos) - neg_mean / static_cast<double>(n_neg);
  direction.normalize();
  const double cr = std::cos(spec.rotation);
  const double sr = std::sin(spec.rotation);

  std::vector<Eigen::Matrix2d> inverse;
  std::vector<double> log_norm;
  for (const ClusterSpec& c : spec.clusters) {
    const Eigen::LLT<Eigen::Matrix2d> llt(c.covariance);
    if (llt.info() != Eigen::Success || !c.covariance.isApprox(c.covariance.transpose())) {
      throw Error(ErrorCode::kDegenerateCovariance, "cluster covariance is not positive definite");
    }
    inverse.push_back(llt.solve(Eigen::Matrix2d::Identity()));
    const Eigen::Matrix2d L = llt.matrixL();
    log_norm.push_back(-std::log(L(0, 0) * L(1, 1)));
  }
  // log p_label(x) up to the shared 2 pi factor.
  auto log_density = [&](const Eigen::Vector2d& x, int label) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    for (std::size_t k = 0; k < spec.clusters.size(); ++k) {
      if (spec.clusters[k].label != label) continue;
      const Eigen::Vector2d r = x - spec.clusters[k].mean;
      terms.push_back(log_norm[k] - 0.5 * r.dot(inverse[k] * r));
      best = std::max(best, terms.back());
    }
    double sum = 0.0;
    for (double t : terms) sum += std::exp(t - best);
    return best + std::log(sum);
  };

  Rng rng(child_seed(seed, SeedStream::kData));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t total = spec.clusters.size() * spec.points_per_cluster;
  FairDataset data;
  data.n_states = n_states;
  data.points.resize(static_cast<Eigen::Index>(total), 2);
  data.labels.resize(static_cast<Eigen::Index>(total));
  data.sensitive.resize(static_cast<Eigen::Index>(total));
  data.state.reserve(total);
  Eigen::Index row = 0;
  for (const ClusterSpec& c : spec.clusters) {
    const Eigen::Matrix2d L = Eigen::LLT<Eigen::Matrix2d>(c.covariance).matrixL();
    for (std::size_t k = 0; k < spec.points_per_cluster; ++k, ++row) {
      const double u1 = normal(rng);
      const double u2 = normal(rng);
      const Eigen::Vector2d x = c.mean + L * Eigen::Vector2d(u1, u2);
      data.points.row(row) = x.transpose();
      data.labels(row) = c.label;
      const Eigen::Vector2d rotated(cr * x(0) - sr * x(1), sr * x(0) + cr * x(1));
      const double logit = spec.rule == SensitiveRule::kLogistic
                               ? spec.sharpness * rotated.dot(direction)
                               : log_density(rotated, 1) - log_density(rotated, -1);
      const double prob = 1.0 / (1.0 + std::exp(-logit));
      data.sensitive(row) = uniform01(rng) < prob ? 1.0 : 0.0;
      data.state.push_back(c.state);
    }
  }
  data.z_bar = data.sensitive.mean();
  return data;
}

ProblemInstance fairness_oracles(const FairDataset& data, double c, double p) {
  if (!(c > 0.0)) throw Error(ErrorCode::kInvalidArgument, "fairness slack c must be positive");
  const auto states = std::make_shared<const std::vector<StateData>>(split_states(data));
  std::vector<StateOracle> oracles;
  for (std::size_t s = 0; s < states->size(); ++s) {
    const StateData* sd = &(*states)[s];
    StateOracle o;
    o.f = [states, sd](const Eigen::VectorXd& theta) {
      const Eigen::VectorXd margins = sd->labels.cwiseProduct(sd->features * theta);
      double sum = 0.0;
      for (Eigen::Index i = 0; i < margins.size(); ++i) sum += softplus_neg(margins(i));
      return sum / static_cast<double>(margins.size());
    };
    o.grad_f = [states, sd](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
      const Eigen::VectorXd margins = sd->labels.cwiseProduct(sd->features * theta);
      Eigen::VectorXd weights(margins.size());
      for (Eigen::Index i = 0; i < margins.size(); ++i) {
        weights(i) = -sd->labels(i) * sigmoid_neg(margins(i));
      }
      return sd->features.transpose() * weights / static_cast<double>(margins.size());
    };
    o.g.push_back([states, sd, c](const Eigen::VectorXd& theta) {
      return sd->constraint_grad.dot(theta) - c;
    });
    o.g.push_back([states, sd, c](const Eigen::VectorXd& theta) {
      return -sd->constraint_grad.dot(theta) - c;
    });
    o.grad_g.push_back([states, sd](const Eigen::VectorXd&) -> Eigen::VectorXd {
      return sd->constraint_grad;
    });
    o.grad_g.push_back([states, sd](const Eigen::VectorXd&) -> Eigen::VectorXd {
      return -sd->constraint_grad;
    });
    oracles.push_back(std::move(o));
  }
  if (oracles.size() != 3) throw Error(ErrorCode::kInvalidArgument, "the fairness chain has 3 states");
  ProblemInstance instance("fairness3", Domain::box(3, -kFairnessBoxHalfWidth, kFairnessBoxHalfWidth),
                           std::move(oracles), TransitionMatrix::symmetric_three_state(p),
                           Eigen::VectorXd::Zero(3));
  instance.set_lipschitz(fairness_bounds(data, c));
  instance.set_slater({Eigen::VectorXd::Zero(3), c});
  return instance;
}

LipschitzBounds fairness_bounds(const FairDataset& data, double c) {
  LipschitzBounds b;
  for (const StateData& sd : split_states(data)) {
    b.F = std::max(b.F, sd.features.rowwise().norm().mean());
    b.G = std::max(b.G, sd.constraint_grad.norm());
    b.H = std::max(b.H, kFairnessBoxHalfWidth * sd.constraint_grad.lpNorm<1>() + c);
  }
  return b;
}

double delta_recipe(const LipschitzBounds& b, double R) {
  return 0.25 * b.F * b.F + 2.0 * R * R * b.G * b.G + 2.0 * b.H * b.H;
}

std::string algorithm_name(FairAlgorithm a) {
  switch (a) {
    case FairAlgorithm::kEdppT:
      return "EDPP-t";
    case FairAlgorithm::kEdppFixed:
      return "EDPP-T";
    case FairAlgorithm::kDppT:
      return "DPP-t";
    case FairAlgorithm::kDppFixed:
      return "DPP-T";
    case FairAlgorithm::kMdpp:
      return "MDPP";
  }
  return "unknown";
}

FairAlgorithm parse_algorithm(const std::string& name) {
  for (FairAlgorithm a : {FairAlgorithm::kEdppT, FairAlgorithm::kEdppFixed, FairAlgorithm::kDppT,
                          FairAlgorithm::kDppFixed, FairAlgorithm::kMdpp}) {
    if (algorithm_name(a) == name) return a;
  }
  throw Error(ErrorCode::kInvalidArgument,
              "unknown algorithm '" + name + "' (expected EDPP-t, EDPP-T, DPP-t, DPP-T or MDPP)");
}

void validate(const FairExperimentConfig& config) {
  if (!(config.p > 0.0 && config.p <= 1.0 / 3.0)) {
    throw Error(ErrorCode::kInvalidArgument, "p must lie in (0, 1/3]");
  }
  if (!(config.c > 0.0)) throw Error(ErrorCode::kInvalidArgument, "c must be positive");
  if (config.T < 2) throw Error(ErrorCode::kInvalidArgument, "T must be at least 2");
  if (config.algorithms.empty()) throw Error(ErrorCode::kInvalidArgument, "no algorithms selected");
  if (!(config.beta > 0.0 && config.beta <= 0.5)) {
    throw Error(ErrorCode::kInvalidBeta, "beta must lie in (0, 1/2]");
  }
  if (config.tau_mix && !(*config.tau_mix > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tau_mix must be positive");
  }
  if (config.mlmc_cap < 1 || (config.mlmc_cap & (config.mlmc_cap - 1)) != 0) {
    throw Error(ErrorCode::kInvalidArgument, "mlmc_cap must be a power of two");
  }
  if (config.delta && !(*config.delta > 0.0)) {
    throw Error(ErrorCode::kNonPositiveDelta, "delta must be positive");
  }
  if (config.sample_budget && *config.sample_budget < 1) {
    throw Error(ErrorCode::kInvalidArgument, "sample_budget must be positive");
  }
  if (config.points_per_cluster < 1) {
    throw Error(ErrorCode::kInvalidArgument, "points_per_cluster must be positive");
  }
}

FairExperimentResult run_experiment(const FairExperimentConfig& config) {
  validate(config);
  DatasetSpec spec = default_cluster_spec();
  spec.points_per_cluster = config.points_per_cluster;
  spec.rule = config.sensitive_rule;
  const FairDataset data = generate_data(config.seed, spec);
  ProblemInstance instance = fairness_oracles(data, config.c, config.p);
  const double R = instance.domain().bregman_radius();
  const double tau = tau_for(config);
  const double delta = config.delta ? *config.delta : delta_recipe(*instance.lipschitz(), R);
  const std::size_t budget = config.sample_budget ? *config.sample_budget : config.T;

  const std::size_t length = std::max(config.T, budget);
  ChainSampler sampler = ChainSampler::from_distribution(
      instance.chain(), config.seed, instance.stationary());
  std::vector<std::size_t> states;
  states.reserve(length);
  for (std::size_t k = 0; k < length; ++k) states.push_back(sampler.step());

  FairExperimentResult result{config, instance, reference_solution(instance), tau, delta, {}};
  result.runs.resize(config.algorithms.size());

  auto run_body = [&](std::size_t k) {
    const FairAlgorithm a = config.algorithms[k];
    const auto start = std::chrono::steady_clock::now();
    const ParameterSchedule schedule = schedule_for(a, config, tau, delta, R);
    ReplaySource source(&states);
    RunOptions options;
    options.seed = config.seed;
    options.debug_asserts = config.debug_asserts;
    Trajectory traj;
    if (a == FairAlgorithm::kMdpp) {
      MlmcOptions mlmc;
      mlmc.cap = config.mlmc_cap;
      mlmc.rule = config.truncation;
      MlmcStream stream(result.instance, source, config.seed, config.T, mlmc);
      options.sample_budget = budget;
      traj = run(result.instance, stream, schedule, budget, options);
    } else {
      SingleSampleStream stream(result.instance, source);
      traj = run(result.instance, stream, schedule, config.T, options);
    }
    traj.schedule = algorithm_name(a);
    RunSummary summary = summarize(result.instance, traj, result.reference);
    summary.tau_mix = tau;
    summary.wall_time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.runs[k] = FairRunResult{a, std::move(traj), std::move(summary)};
  };
  auto run_one = [&](std::size_t k) {
    try {
      run_body(k);
    } catch (const Error& e) {
      throw Error(e.code(), algorithm_name(config.algorithms[k]) + ": " + e.what());
    }
  };

  const std::size_t threads = std::clamp<std::size_t>(config.threads, 1, config.algorithms.size());
  if (threads == 1) {
    for (std::size_t k = 0; k < config.algorithms.size(); ++k) run_one(k);
    return result;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < config.algorithms.size(); k = next++) {
        try {
          run_one(k);
        } catch (...) {
          const std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return result;
}

}  // namespace markov_dpp

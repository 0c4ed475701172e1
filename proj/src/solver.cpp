#include "markov_dpp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <type_traits>

#include "markov_dpp/chain.hpp"
#include "markov_dpp/error.hpp"
#include "markov_dpp/random.hpp"

namespace markov_dpp {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_beta(double beta) {
  if (!(beta > 0.0 && beta <= 0.5)) {
    throw Error(ErrorCode::kInvalidBeta, "beta must lie in (0, 1/2], got " + std::to_string(beta));
  }
}

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " must be positive and finite");
  }
}

bool all_finite(const PointEval& e) {
  return std::isfinite(e.f) && e.grad_f.allFinite() && e.g.allFinite() && e.grad_g.allFinite();
}

double tolerance(double scale) { return 1e-9 * (1.0 + std::abs(scale)); }

class InvariantRecorder {
 public:
  InvariantRecorder(Trajectory* out, bool throw_on_violation)
      : out_(out), throw_(throw_on_violation) {}

  void check(std::size_t step, const char* name, std::size_t constraint, double lhs, double rhs,
             double scale) {
    ++out_->checks_performed;
    if (lhs <= rhs + tolerance(scale)) return;
    out_->violations.push_back({step, name, constraint, lhs, rhs});
    if (throw_) {
      throw StepError(ErrorCode::kInvariantViolation, step,
                      std::string(name) + " violated: " + std::to_string(lhs) + " > " +
                          std::to_string(rhs));
    }
  }

 private:
  Trajectory* out_;
  bool throw_;
};

}  // namespace

void validate_schedule(const ParameterSchedule& schedule) {
  std::visit(Overloaded{
                 [](const EdppSchedule& s) {
                   check_beta(s.beta);
                   check_positive(s.tau_mix, "tau_mix");
                 },
                 [](const EdppFixedHorizonSchedule& s) {
                   check_beta(s.beta);
                   check_positive(s.tau_mix, "tau_mix");
                   if (s.horizon < 1) throw Error(ErrorCode::kInvalidArgument, "horizon must be >= 1");
                 },
                 [](const DppFixedSchedule& s) {
                   if (s.horizon < 1) throw Error(ErrorCode::kInvalidArgument, "horizon must be >= 1");
                 },
                 [](const MdppSchedule& s) {
                   check_beta(s.beta);
                   if (!(s.delta > 0.0) || !std::isfinite(s.delta)) {
                     throw Error(ErrorCode::kNonPositiveDelta, "MDPP needs delta > 0");
                   }
                   check_positive(s.R, "R");
                 },
                 [](const AdversarialSchedule& s) {
                   check_beta(s.beta);
                   check_positive(s.R, "R");
                 },
             },
             schedule);
}

std::string schedule_name(const ParameterSchedule& schedule) {
  return std::visit(Overloaded{
                        [](const EdppSchedule&) { return std::string("edpp"); },
                        [](const EdppFixedHorizonSchedule&) { return std::string("edpp_T"); },
                        [](const DppFixedSchedule&) { return std::string("dpp_fixed"); },
                        [](const MdppSchedule&) { return std::string("mdpp"); },
                        [](const AdversarialSchedule&) { return std::string("adversarial"); },
                    },
                    schedule);
}

bool reads_updated_accumulator(const ParameterSchedule& schedule) {
  return std::holds_alternative<AdversarialSchedule>(schedule);
}

bool uses_accumulator(const ParameterSchedule& schedule) {
  return std::holds_alternative<MdppSchedule>(schedule) ||
         std::holds_alternative<AdversarialSchedule>(schedule);
}

AdaptiveAccumulator AdaptiveAccumulator::for_schedule(const ParameterSchedule& schedule) {
  AdaptiveAccumulator acc;
  if (const auto* m = std::get_if<MdppSchedule>(&schedule)) {
    acc.delta_ = m->delta;
    acc.total_ = m->delta;
    acc.delta_in_increment_ = m->delta_in_increment;
  }
  return acc;
}

double AdaptiveAccumulator::add(double F, const Eigen::VectorXd& G, const Eigen::VectorXd& H,
                                double R) {
  double a = 0.25 * F * F + R * R * G.squaredNorm() + H.squaredNorm();
  if (delta_in_increment_) a += delta_;
  total_ += a;
  history_.push_back(a);
  return a;
}

ScheduleParams schedule_params(const ParameterSchedule& schedule, std::size_t t,
                               const AdaptiveAccumulator& accumulator) {
  if (t < 1) throw Error(ErrorCode::kInvalidArgument, "steps are numbered from 1");
  const double td = static_cast<double>(t);
  return std::visit(
      Overloaded{
          [&](const EdppSchedule& s) {
            const double a = s.tau_mix * td;
            return ScheduleParams{std::pow(a, s.beta), a};
          },
          [&](const EdppFixedHorizonSchedule& s) {
            const double a = s.tau_mix * static_cast<double>(s.horizon);
            return ScheduleParams{std::pow(a, s.beta), a};
          },
          [&](const DppFixedSchedule& s) {
            const double a = static_cast<double>(s.horizon);
            return ScheduleParams{std::sqrt(a), a};
          },
          [&](const MdppSchedule& s) {
            const double S = accumulator.total();
            return ScheduleParams{std::pow(S, s.beta) / s.R, S / (s.R * s.R)};
          },
          [&](const AdversarialSchedule& s) {
            const double S = accumulator.total();
            return ScheduleParams{std::pow(S, s.beta) / s.R, S / (s.R * s.R)};
          },
      },
      schedule);
}

SolverState initial_state(const ProblemInstance& instance, const ParameterSchedule& schedule) {
  SolverState st;
  st.t = 1;
  st.x = instance.initial_point();
  st.Q = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(instance.n_constraints()));
  st.accumulator = AdaptiveAccumulator::for_schedule(schedule);
  return st;
}

Eigen::VectorXd primal_update(const Domain& domain, const Eigen::VectorXd& x, double V,
                              double alpha, const Eigen::VectorXd& grad_f,
                              const Eigen::VectorXd& Q, const Eigen::MatrixXd& grad_g) {
  if (grad_f.size() != x.size() || grad_g.rows() != Q.size() ||
      (grad_g.rows() > 0 && grad_g.cols() != x.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "primal_update arguments do not match");
  }
  Eigen::VectorXd c = V * grad_f;
  if (Q.size() > 0) c += grad_g.transpose() * Q;
  if (!c.allFinite()) throw Error(ErrorCode::kNonFiniteGradient, "non-finite primal direction");
  if (alpha <= 0.0) {
    if (c.isZero(0.0)) return x;
    throw Error(ErrorCode::kInvalidArgument, "alpha must be positive when the direction is nonzero");
  }
  return domain.project(x - c / (2.0 * alpha));
}

double dual_update(double Q, double g_val, const Eigen::VectorXd& grad_g, const Eigen::VectorXd& dx) {
  return std::max(0.0, Q + g_val + grad_g.dot(dx));
}

Trajectory run(const ProblemInstance& instance, DataStream& stream,
               const ParameterSchedule& schedule, std::size_t T, const RunOptions& options) {
  validate_schedule(schedule);
  if (T < 1) throw Error(ErrorCode::kInvalidArgument, "run needs T >= 1");
  Trajectory out;
  out.instance = instance.name();
  out.schedule = schedule_name(schedule);
  out.seed = options.seed;
  out.steps.reserve(T);

  SolverState st = initial_state(instance, schedule);
  if (options.x1) {
    if (!instance.domain().contains(*options.x1)) {
      throw Error(ErrorCode::kInvalidArgument, "x1 must lie in the domain");
    }
    st.x = *options.x1;
  }
  const Domain& domain = instance.domain();
  const double R = domain.bregman_radius();
  const auto m = static_cast<Eigen::Index>(instance.n_constraints());
  const bool updated_first = reads_updated_accumulator(schedule);
  const bool adaptive = uses_accumulator(schedule);

  InvariantRecorder recorder(&out, options.throw_on_violation);
  Rng probe_rng(child_seed(options.seed, SeedStream::kProbes));
  ScheduleParams previous{};

  for (std::size_t t = 1; t <= T; ++t) {
    if (options.sample_budget &&
        stream.samples_consumed() + stream.pending_samples() > *options.sample_budget) {
      break;
    }
    const StepFunction fn = stream.next();
    const PointEval e = fn.evaluate(st.x);
    if (!all_finite(e)) {
      throw StepError(ErrorCode::kNonFiniteGradient, t, "observed function is not finite at x_t");
    }
    const double F = e.grad_f.norm();
    Eigen::VectorXd G(m);
    for (Eigen::Index i = 0; i < m; ++i) G(i) = e.grad_g.row(i).norm();
    const Eigen::VectorXd H = e.g.cwiseAbs();

    if (adaptive && updated_first) st.accumulator.add(F, G, H, R);
    const ScheduleParams p = schedule_params(schedule, t, st.accumulator);
    if (adaptive && !updated_first) st.accumulator.add(F, G, H, R);

    Eigen::VectorXd x_next;
    try {
      x_next = primal_update(domain, st.x, p.V, p.alpha, e.grad_f, st.Q, e.grad_g);
    } catch (const Error& err) {
      throw StepError(err.code(), t, err.what());
    }
    const Eigen::VectorXd dx = x_next - st.x;
    Eigen::VectorXd Q_next(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      Q_next(i) = dual_update(st.Q(i), e.g(i), e.grad_g.row(i).transpose(), dx);
    }

    if (options.debug_asserts) {
      const double dx_norm = dx.norm();
      PointEval next_eval;
      const bool single = fn.samples() == 1;
      if (single) next_eval = fn.evaluate(x_next);
      for (Eigen::Index i = 0; i < m; ++i) {
        const auto ci = static_cast<std::size_t>(i);
        const double q = st.Q(i);
        const double qn = Q_next(i);
        const double dq = qn - q;
        recorder.check(t, "queue_nonnegative", ci, -qn, 0.0, 0.0);
        const double reach = H(i) + G(i) * R;
        recorder.check(t, "queue_change_lower", ci, -dq, reach, reach);
        if (single) {
          const double bound = std::max(0.0, next_eval.g(i));
          recorder.check(t, "queue_change_upper", ci, dq, bound, bound + q);
        } else {
          const double bound = H(i) + G(i) * dx_norm;
          recorder.check(t, "queue_change_upper", ci, dq, bound, bound + q);
        }
        const double drift = 0.5 * (qn * qn - q * q);
        const double drift_rhs = q * (e.g(i) + e.grad_g.row(i).dot(dx)) + 0.5 * reach * reach;
        recorder.check(t, "drift", ci, drift, drift_rhs, std::abs(drift) + std::abs(drift_rhs));
      }
      if (p.alpha > 0.0) {
        const double step_bound = (p.V * F + st.Q.dot(G)) / (2.0 * p.alpha);
        recorder.check(t, "step_size", 0, dx_norm, step_bound, step_bound);

        Eigen::VectorXd c = p.V * e.grad_f;
        if (m > 0) c += e.grad_g.transpose() * st.Q;
        const double lhs = c.dot(dx) + p.alpha * dx.squaredNorm();
        for (std::size_t k = 0; k < options.probe_points; ++k) {
          const Eigen::VectorXd z = domain.sample(probe_rng);
          const Eigen::VectorXd dz = z - st.x;
          const double rhs = c.dot(dz) + p.alpha * dz.squaredNorm() -
                             p.alpha * (z - x_next).squaredNorm();
          const double scale = std::abs(rhs) + std::abs(c.dot(dz)) + p.alpha * dz.squaredNorm();
          recorder.check(t, "three_point", k, lhs, rhs, scale);
        }
      }
      if (t > 1) {
        recorder.check(t, "V_monotone", 0, previous.V, p.V, p.V);
        recorder.check(t, "alpha_monotone", 0, previous.alpha, p.alpha, p.alpha);
        if (previous.V > 0.0 && p.V > 0.0) {
          const double before = previous.alpha / previous.V;
          const double now = p.alpha / p.V;
          recorder.check(t, "alpha_over_V_monotone", 0, before, now, now);
        }
      }
    }

    StepRecord rec;
    rec.t = t;
    rec.samples = fn.samples();
    rec.level = fn.draw().level;
    rec.truncated = fn.draw().truncated;
    rec.V = p.V;
    rec.alpha = p.alpha;
    rec.x = st.x;
    rec.Q = st.Q;
    rec.f_at_x = e.f;
    rec.g_at_x = e.g;
    if (fn.samples() == 1) {
      rec.f_samples_at_x = e.f;
      rec.g_samples_at_x = e.g;
    } else {
      SampleSums sums = fn.sample_sums(st.x);
      rec.f_samples_at_x = sums.f;
      rec.g_samples_at_x = std::move(sums.g);
    }
    rec.F = F;
    rec.G = std::move(G);
    rec.H = H;
    rec.states = fn.draw().states;
    out.steps.push_back(std::move(rec));

    previous = p;
    st.x = x_next;
    st.Q = std::move(Q_next);
    st.t = t + 1;
  }
  out.x_final = st.x;
  out.Q_final = st.Q;
  out.samples_consumed = stream.samples_consumed();
  return out;
}

Trajectory run_on_chain(const ProblemInstance& instance, const ParameterSchedule& schedule,
                        std::size_t T, std::uint64_t seed, const ChainRunOptions& options) {
  validate_schedule(schedule);
  ChainSampler sampler =
      options.initial_state
          ? ChainSampler(instance.chain(), seed, *options.initial_state)
          : ChainSampler::from_distribution(instance.chain(), seed,
                                            instance.stationary());
  bool use_mlmc = options.stream == StreamKind::kMlmc;
  if (options.stream == StreamKind::kAuto) use_mlmc = std::holds_alternative<MdppSchedule>(schedule);

  RunOptions run_options = options.run;
  run_options.seed = seed;
  if (use_mlmc) {
    MlmcStream stream(instance, sampler, seed, std::max<std::size_t>(T, 2), options.mlmc);
    return run(instance, stream, schedule, T, run_options);
  }
  SingleSampleStream stream(instance, sampler);
  return run(instance, stream, schedule, T, run_options);
}

}  // namespace markov_dpp

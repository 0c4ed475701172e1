#include "markov_dpp/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "markov_dpp/error.hpp"

namespace markov_dpp {
namespace {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double max_or_zero(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.maxCoeff(); }

struct AugmentedLagrangian {
  const ProblemInstance& instance;
  Eigen::VectorXd lambda;
  double rho = 10.0;

  double value(const Eigen::VectorXd& x) const {
    const BarEval e = bar_eval(instance, x);
    double v = e.f;
    for (Eigen::Index i = 0; i < e.g.size(); ++i) {
      const double s = std::max(0.0, lambda(i) + rho * e.g(i));
      v += (s * s - lambda(i) * lambda(i)) / (2.0 * rho);
    }
    return v;
  }

  Eigen::VectorXd gradient(const PointEval& e) const {
    Eigen::VectorXd grad = e.grad_f;
    for (Eigen::Index i = 0; i < e.g.size(); ++i) {
      const double s = std::max(0.0, lambda(i) + rho * e.g(i));
      grad += s * e.grad_g.row(i).transpose();
    }
    return grad;
  }
};

// Spectral projected gradient with backtracking on a monotone Armijo test.
Eigen::VectorXd spg_minimize(const AugmentedLagrangian& al, const Domain& domain,
                             Eigen::VectorXd x, double tol, std::size_t max_iter) {
  PointEval e = bar_eval_with_gradients(al.instance, x);
  Eigen::VectorXd grad = al.gradient(e);
  double value = al.value(x);
  double step = 1.0;
  for (std::size_t k = 0; k < max_iter; ++k) {
    const Eigen::VectorXd pg = x - domain.project(x - grad);
    if (pg.norm() < tol) break;
    Eigen::VectorXd d = domain.project(x - step * grad) - x;
    double slope = grad.dot(d);
    if (slope >= 0.0) {
      d = -pg;
      slope = grad.dot(d);
    }
    double theta = 1.0;
    Eigen::VectorXd x_new = x + d;
    double v_new = al.value(x_new);
    while (v_new > value + 1e-4 * theta * slope && theta > 1e-20) {
      theta *= 0.5;
      x_new = x + theta * d;
      v_new = al.value(x_new);
    }
    const PointEval e_new = bar_eval_with_gradients(al.instance, x_new);
    const Eigen::VectorXd grad_new = al.gradient(e_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = grad_new - grad;
    const double sy = s.dot(y);
    step = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, 1e-12, 1e12) : 1e12;
    if (s.norm() == 0.0) break;
    x = x_new;
    grad = grad_new;
    value = v_new;
  }
  return x;
}

double kkt_residual(const ProblemInstance& instance, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& lambda) {
  const PointEval e = bar_eval_with_gradients(instance, x);
  Eigen::VectorXd grad = e.grad_f;
  if (e.g.size() > 0) grad += e.grad_g.transpose() * lambda;
  double r = (x - instance.domain().project(x - grad)).norm();
  for (Eigen::Index i = 0; i < e.g.size(); ++i) {
    r = std::max(r, std::max(0.0, e.g(i)));
    r = std::max(r, std::abs(lambda(i) * e.g(i)));
  }
  return r;
}

// Smallest step toward the Slater point that restores bar g <= tolerance.
Eigen::VectorXd restore_feasibility(const ProblemInstance& instance, const Eigen::VectorXd& x) {
  if (max_or_zero(bar_eval(instance, x).g) <= kFeasibilityTolerance) return x;
  if (!instance.slater()) {
    throw Error(ErrorCode::kNoFeasiblePoint,
                "reference solution is infeasible and no Slater point is known");
  }
  const Eigen::VectorXd& anchor = instance.slater()->x_hat;
  double lo = 0.0;
  double hi = 1.0;
  for (int k = 0; k < 100; ++k) {
    const double mid = 0.5 * (lo + hi);
    const Eigen::VectorXd p = x + mid * (anchor - x);
    if (max_or_zero(bar_eval(instance, p).g) <= kFeasibilityTolerance) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return x + hi * (anchor - x);
}

ReferenceSolution descent_solution(const ProblemInstance& instance, const ReferenceOptions& opt) {
  const auto m = static_cast<Eigen::Index>(instance.n_constraints());
  AugmentedLagrangian al{instance, Eigen::VectorXd::Zero(m), 10.0};
  Eigen::VectorXd x = instance.slater() ? instance.slater()->x_hat : instance.initial_point();
  double residual = std::numeric_limits<double>::infinity();
  double last_violation = std::numeric_limits<double>::infinity();
  double inner_tol = 1e-4;
  for (std::size_t outer = 0; outer < opt.max_outer; ++outer) {
    x = spg_minimize(al, instance.domain(), x, inner_tol, opt.max_inner);
    const BarEval e = bar_eval(instance, x);
    for (Eigen::Index i = 0; i < m; ++i) al.lambda(i) = std::max(0.0, al.lambda(i) + al.rho * e.g(i));
    residual = kkt_residual(instance, x, al.lambda);
    if (residual < kKktTolerance) break;
    const double v = std::max(0.0, max_or_zero(e.g));
    if (v > 0.25 * last_violation && al.rho < 1e10) al.rho *= 10.0;
    last_violation = v;
    inner_tol = std::max(1e-10, inner_tol * 0.1);
  }
  x = restore_feasibility(instance, x);
  ReferenceSolution ref;
  ref.x_star = x;
  const BarEval e = bar_eval(instance, x);
  ref.f_bar_star = e.f;
  ref.method = ReferenceMethod::kDescent;
  ref.tolerance = residual;
  ref.max_violation = max_or_zero(e.g);
  return ref;
}

// bar g_i(x) <= 0 for every i, without evaluating the objective.
bool bar_feasible(const ProblemInstance& instance, const Eigen::VectorXd& x) {
  const Eigen::VectorXd& mu = instance.stationary();
  for (std::size_t i = 0; i < instance.n_constraints(); ++i) {
    double g = 0.0;
    for (std::size_t s = 0; s < instance.n_states(); ++s) {
      const double w = mu(static_cast<Eigen::Index>(s));
      if (w != 0.0) g += w * instance.oracle(s).g[i](x);
    }
    if (g > 0.0) return false;
  }
  return true;
}

ReferenceSolution grid_solution(const ProblemInstance& instance, const ReferenceOptions& opt) {
  const Domain& domain = instance.domain();
  const std::size_t d = domain.dim();
  if (d > 3) throw Error(ErrorCode::kInvalidArgument, "grid reference needs dimension <= 3");
  if (opt.grid_points < 2) throw Error(ErrorCode::kInvalidArgument, "grid needs >= 2 points");
  if (opt.grid_beam < 1) throw Error(ErrorCode::kInvalidArgument, "grid beam must be >= 1");
  const auto n = static_cast<Eigen::Index>(d);
  const bool box = domain.kind() == Domain::Kind::kBox;
  const Eigen::VectorXd lo =
      box ? domain.lower() : Eigen::VectorXd(domain.center().array() - domain.ball_radius());
  const Eigen::VectorXd hi =
      box ? domain.upper() : Eigen::VectorXd(domain.center().array() + domain.ball_radius());

  struct Candidate {
    double f;
    Eigen::VectorXd x;
  };
  const std::size_t k = opt.grid_points;
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= k;
  const double half = 0.5 * static_cast<double>(k - 1);

  // Level 0 meshes the bounding box; each later level meshes a window of
  // +-2 previous spacings around each retained candidate (beam search).
  Eigen::VectorXd h = (hi - lo) / static_cast<double>(k - 1);
  std::vector<Eigen::VectorXd> centers{0.5 * (lo + hi)};
  std::optional<Candidate> best;
  for (std::size_t level = 0; level < opt.grid_levels; ++level) {
    std::vector<Candidate> found;
    Eigen::VectorXd x(n);
    for (const Eigen::VectorXd& c : centers) {
      for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t r = idx;
        for (Eigen::Index i = 0; i < n; ++i) {
          x(i) = std::clamp(c(i) + h(i) * (static_cast<double>(r % k) - half), lo(i), hi(i));
          r /= k;
        }
        if (!domain.contains(x) || !bar_feasible(instance, x)) continue;
        found.push_back({bar_eval(instance, x).f, x});
      }
    }
    if (found.empty()) break;
    std::sort(found.begin(), found.end(),
              [](const Candidate& a, const Candidate& b) { return a.f < b.f; });
    if (!best || found.front().f < best->f) best = found.front();

    centers.clear();
    for (const Candidate& cand : found) {
      const bool distinct = std::none_of(centers.begin(), centers.end(), [&](const Eigen::VectorXd& o) {
        return ((o - cand.x).array().abs() <= 2.0 * h.array()).all();
      });
      if (distinct) centers.push_back(cand.x);
      if (centers.size() == opt.grid_beam) break;
    }
    if (level + 1 < opt.grid_levels) h *= 4.0 / static_cast<double>(k - 1);
  }
  if (!best) throw Error(ErrorCode::kNoFeasiblePoint, "no grid point satisfies bar g <= 0");

  ReferenceSolution ref;
  ref.x_star = best->x;
  ref.f_bar_star = best->f;
  ref.method = ReferenceMethod::kGrid;
  ref.tolerance = h.maxCoeff();
  ref.max_violation = max_or_zero(bar_eval(instance, best->x).g);
  return ref;
}

}  // namespace

StepFunction step_function(const ProblemInstance& instance, const StepRecord& step) {
  MlmcDraw draw;
  draw.level = step.level;
  draw.samples = step.samples;
  draw.truncated = step.truncated;
  draw.states = step.states;
  return StepFunction(&instance, std::move(draw));
}

Eigen::VectorXd average_iterate(const Trajectory& traj) {
  if (traj.steps.empty()) throw Error(ErrorCode::kInvalidArgument, "empty trajectory");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(traj.steps.front().x.size());
  for (const StepRecord& s : traj.steps) sum += s.x;
  return sum / static_cast<double>(traj.steps.size());
}

std::vector<double> cumulative_regret(const ProblemInstance& instance, const Trajectory& traj,
                                      const Eigen::VectorXd& comparator) {
  std::vector<double> out;
  out.reserve(traj.steps.size());
  double acc = 0.0;
  for (const StepRecord& s : traj.steps) {
    acc += s.f_at_x - step_function(instance, s).f(comparator);
    out.push_back(acc);
  }
  return out;
}

double regret(const ProblemInstance& instance, const Trajectory& traj,
              const Eigen::VectorXd& comparator, bool benchmark) {
  if (!instance.domain().contains(comparator, 1e-9)) {
    throw Error(ErrorCode::kInvalidArgument, "comparator must lie in the domain");
  }
  if (benchmark && max_or_zero(bar_eval(instance, comparator).g) > kFeasibilityTolerance) {
    throw Error(ErrorCode::kInfeasibleComparator, "comparator violates bar g <= 0");
  }
  const std::vector<double> cum = cumulative_regret(instance, traj, comparator);
  return cum.empty() ? 0.0 : cum.back();
}

double per_sample_regret(const ProblemInstance& instance, const Trajectory& traj,
                         const Eigen::VectorXd& comparator) {
  double acc = 0.0;
  for (const StepRecord& s : traj.steps) {
    acc += s.f_samples_at_x - step_function(instance, s).sample_sums(comparator).f;
  }
  return acc;
}

std::vector<double> cumulative_violation(const Trajectory& traj, std::size_t i) {
  if (i >= traj.n_constraints()) throw Error(ErrorCode::kInvalidArgument, "constraint index out of range");
  std::vector<double> out;
  out.reserve(traj.steps.size());
  double acc = 0.0;
  for (const StepRecord& s : traj.steps) {
    acc += s.g_at_x(static_cast<Eigen::Index>(i));
    out.push_back(acc);
  }
  return out;
}

double violation(const Trajectory& traj, std::size_t i) {
  const std::vector<double> cum = cumulative_violation(traj, i);
  return cum.empty() ? 0.0 : cum.back();
}

std::string reference_method_name(ReferenceMethod m) {
  return m == ReferenceMethod::kGrid ? "grid" : "projected-descent";
}

ReferenceSolution reference_solution(const ProblemInstance& instance,
                                     const ReferenceOptions& options) {
  return options.method == ReferenceMethod::kGrid ? grid_solution(instance, options)
                                                  : descent_solution(instance, options);
}

double gap(const ProblemInstance& instance, const Eigen::VectorXd& x_bar,
           const ReferenceSolution& ref) {
  return bar_eval(instance, x_bar).f - ref.f_bar_star;
}

Eigen::VectorXd infeasibility(const ProblemInstance& instance, const Eigen::VectorXd& x_bar) {
  return bar_eval(instance, x_bar).g;
}

void write_trajectory_csv(std::ostream& out, const ProblemInstance& instance,
                          const Trajectory& traj, const std::optional<Eigen::VectorXd>& comparator) {
  const std::size_t d = instance.dim();
  const std::size_t m = instance.n_constraints();
  out << "t,N_t,samples,level,V_t,alpha_t";
  for (std::size_t k = 0; k < d; ++k) out << ",x_" << k;
  for (std::size_t i = 0; i < m; ++i) out << ",Q_" << i;
  out << ",f_t_at_xt";
  for (std::size_t i = 0; i < m; ++i) out << ",g_" << i << "_at_xt";
  out << ",f_samples_at_xt";
  for (std::size_t i = 0; i < m; ++i) out << ",g_" << i << "_samples_at_xt";
  out << ",state_first,state_last";
  if (comparator) out << ",cum_regret";
  for (std::size_t i = 0; i < m; ++i) out << ",cum_violation_" << i;
  out << '\n';

  std::vector<double> cum_regret;
  if (comparator) cum_regret = cumulative_regret(instance, traj, *comparator);
  std::vector<double> cum_violation(m, 0.0);
  std::size_t samples = 0;
  for (std::size_t r = 0; r < traj.steps.size(); ++r) {
    const StepRecord& s = traj.steps[r];
    samples += s.samples;
    out << s.t << ',' << s.samples << ',' << samples << ',' << s.level << ','
        << format_double(s.V) << ',' << format_double(s.alpha);
    for (Eigen::Index k = 0; k < s.x.size(); ++k) out << ',' << format_double(s.x(k));
    for (Eigen::Index i = 0; i < s.Q.size(); ++i) out << ',' << format_double(s.Q(i));
    out << ',' << format_double(s.f_at_x);
    for (Eigen::Index i = 0; i < s.g_at_x.size(); ++i) out << ',' << format_double(s.g_at_x(i));
    out << ',' << format_double(s.f_samples_at_x);
    for (Eigen::Index i = 0; i < s.g_samples_at_x.size(); ++i) {
      out << ',' << format_double(s.g_samples_at_x(i));
    }
    out << ',' << s.states.front() << ',' << s.states.back();
    if (comparator) out << ',' << format_double(cum_regret[r]);
    for (std::size_t i = 0; i < m; ++i) {
      cum_violation[i] += s.g_at_x(static_cast<Eigen::Index>(i));
      out << ',' << format_double(cum_violation[i]);
    }
    out << '\n';
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::kParseError, "CSV has no column " + name);
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, "CSV is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
        throw Error(ErrorCode::kParseError,
                    "CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
      row.push_back(v);
    }
    if (row.size() != table.header.size()) {
      throw Error(ErrorCode::kParseError,
                  "CSV line " + std::to_string(line_no) + " has the wrong number of fields");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

RunSummary summarize(const ProblemInstance& instance, const Trajectory& traj,
                     const ReferenceSolution& ref) {
  RunSummary s;
  const Eigen::VectorXd x_bar = average_iterate(traj);
  s.final_gap = gap(instance, x_bar, ref);
  const Eigen::VectorXd inf = infeasibility(instance, x_bar);
  s.final_infeasibility.assign(inf.data(), inf.data() + inf.size());
  s.regret = regret(instance, traj, ref.x_star);
  for (std::size_t i = 0; i < instance.n_constraints(); ++i) s.violation.push_back(violation(traj, i));
  s.seed = traj.seed;
  s.iterations = traj.length();
  s.samples = traj.samples_consumed;
  return s;
}

nlohmann::json to_json(const RunSummary& s) {
  nlohmann::json j;
  j["final_gap"] = s.final_gap;
  j["final_infeasibility"] = s.final_infeasibility;
  j["regret"] = s.regret;
  j["violation"] = s.violation;
  j["tau_mix"] = s.tau_mix;
  j["seed"] = s.seed;
  j["wall_time_ms"] = s.wall_time_ms;
  j["iterations"] = s.iterations;
  j["samples"] = s.samples;
  j["config"] = s.config;
  j["version"] = s.version;
  return j;
}

RunSummary summary_from_json(const nlohmann::json& j) {
  try {
    RunSummary s;
    s.final_gap = j.at("final_gap").get<double>();
    s.final_infeasibility = j.at("final_infeasibility").get<std::vector<double>>();
    s.regret = j.at("regret").get<double>();
    s.violation = j.at("violation").get<std::vector<double>>();
    s.tau_mix = j.at("tau_mix").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.wall_time_ms = j.at("wall_time_ms").get<double>();
    s.iterations = j.value("iterations", std::size_t{0});
    s.samples = j.value("samples", std::size_t{0});
    s.config = j.value("config", nlohmann::json::object());
    s.version = j.value("version", std::string());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("summary JSON: ") + e.what());
  }
}

SumBound sqrt_sum_bound(const std::vector<double>& x) {
  SumBound b;
  double X = 0.0;
  for (double v : x) {
    if (v < 0.0) throw Error(ErrorCode::kInvalidArgument, "sequence must be nonnegative");
    X += v;
    if (X > 0.0) b.lhs += v / std::sqrt(X);
  }
  b.rhs = 2.0 * std::sqrt(X);
  return b;
}

SumBound power_sum_bound(std::size_t T, double q) {
  if (!(q > 0.0)) throw Error(ErrorCode::kInvalidArgument, "power sum bound needs q > 0");
  SumBound b;
  for (std::size_t t = 1; t <= T; ++t) b.lhs += std::pow(static_cast<double>(t), q);
  b.rhs = (std::pow(static_cast<double>(T) + 1.0, q + 1.0) - 1.0) / (q + 1.0);
  return b;
}

SumBound lagged_power_sum_bound(const std::vector<double>& x, double delta, double C, double gamma) {
  if (!(delta > 0.0) || delta > C) throw Error(ErrorCode::kInvalidArgument, "need 0 < delta <= C");
  if (!(gamma > 0.0) || gamma == 1.0) throw Error(ErrorCode::kInvalidArgument, "need 0 < gamma != 1");
  SumBound b;
  double X = delta;
  for (double v : x) {
    if (v < 0.0 || v > C) throw Error(ErrorCode::kInvalidArgument, "terms must lie in [0, C]");
    b.lhs += std::pow(X, -gamma) * v;
    X += v;
  }
  b.rhs = C * std::pow(delta, -gamma) +
          (std::pow(std::max(delta, X - C), 1.0 - gamma) - std::pow(delta, 1.0 - gamma)) / (1.0 - gamma);
  return b;
}

}  // namespace markov_dpp

#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "markov_dpp/error.hpp"
#include "markov_dpp/fairexp.hpp"
#include "markov_dpp/instances.hpp"
#include "markov_dpp/metrics.hpp"
#include "markov_dpp/solver.hpp"

#ifndef MARKOV_DPP_VERSION
#define MARKOV_DPP_VERSION "0.1.0-unknown"
#endif

namespace markov_dpp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Failures in reading or validating input; mapped to the usage exit code.
struct UsageError : Error {
  using Error::Error;
};

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(ErrorCode::kParseError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::size_t thread_cap() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MARKOV_DPP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw UsageError(ErrorCode::kInvalidArgument, "MARKOV_DPP_THREADS must be a positive integer");
    }
    n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

// Runs `validate_step` mapping library errors to usage errors.
template <class F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.code(), e.what());
  }
}

struct ChainMixArgs {
  std::string input;
  double eps = 0.25;
  std::int64_t horizon = 1000;
};

int cmd_chain_mix(const ChainMixArgs& args, std::ostream& out) {
  if (!(args.eps > 0.0 && args.eps < 1.0)) {
    throw UsageError(ErrorCode::kInvalidArgument, "--eps must lie in (0, 1)");
  }
  if (args.horizon < 2) throw UsageError(ErrorCode::kInvalidArgument, "--horizon must be >= 2");
  const TransitionMatrix p = as_usage([&] {
    TransitionMatrix m = parse_chain_json(read_text(args.input));
    validate(m);
    return m;
  });
  const MixingReport r = mixing_report(p, args.horizon, args.eps);
  json j;
  j["tau_mix"] = r.tau_mix;
  j["tau_of_T"] = r.tau_of_T;
  j["horizon"] = r.horizon;
  j["eps"] = r.eps;
  j["tau_eps"] = r.tau_eps;
  j["spectral_lower"] = optional_json(r.spectral_lower);
  j["spectral_upper"] = optional_json(r.spectral_upper);
  j["approx"] = optional_json(r.approx);
  out << j.dump(2) << '\n';
  return kExitOk;
}

ParameterSchedule build_schedule(const RunConfig& c, const ProblemInstance& instance, double tau) {
  const double R = instance.domain().bregman_radius();
  ParameterSchedule s;
  if (c.schedule == "edpp") {
    s = EdppSchedule{tau, c.beta};
  } else if (c.schedule == "edpp_T") {
    s = EdppFixedHorizonSchedule{tau, c.T, c.beta};
  } else if (c.schedule == "dpp_fixed") {
    s = DppFixedSchedule{c.T};
  } else if (c.schedule == "mdpp") {
    if (!c.delta) {
      std::string hint;
      if (instance.lipschitz()) {
        hint = " (for " + instance.name() + " the recipe gives " +
               std::to_string(delta_recipe(*instance.lipschitz(), R)) + ")";
      }
      throw UsageError(ErrorCode::kNonPositiveDelta,
                       "--schedule mdpp requires --delta; the recommended recipe is "
                       "delta = F^2/4 + 2 R^2 G^2 + 2 H^2" + hint);
    }
    s = MdppSchedule{c.beta, *c.delta, R, instance.n_constraints() == 1};
  } else if (c.schedule == "adversarial") {
    s = AdversarialSchedule{c.beta, R};
  } else {
    throw UsageError(ErrorCode::kInvalidArgument,
                     "unknown schedule '" + c.schedule +
                         "' (expected edpp, edpp_T, dpp_fixed, mdpp or adversarial)");
  }
  as_usage([&] { validate_schedule(s); });
  return s;
}

int cmd_solve(const RunConfig& c, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  InstanceParams params;
  params.p = c.p;
  params.seed = c.seed;
  params.fairness_slack = c.fairness_slack;
  const ProblemInstance instance = as_usage([&] { return make_instance(c.instance, params); });
  const double chain_tau = static_cast<double>(mixing_time(instance.chain(), 0.25));
  const double tau = c.tau_mix ? *c.tau_mix : chain_tau;
  const ParameterSchedule schedule = build_schedule(c, instance, tau);

  ChainRunOptions options;
  options.run.debug_asserts = c.debug_asserts;
  options.stream = as_usage([&] { return parse_stream(c.stream); });
  options.mlmc.cap = c.mlmc_cap;
  options.mlmc.rule = as_usage([&] { return parse_truncation(c.truncation); });
  if (c.mlmc_cap && (*c.mlmc_cap & (*c.mlmc_cap - 1)) != 0) {
    throw UsageError(ErrorCode::kInvalidArgument, "mlmc_cap must be a power of two");
  }

  const Trajectory traj = run_on_chain(instance, schedule, c.T, c.seed, options);
  const ReferenceSolution ref = reference_solution(instance);
  RunSummary summary = summarize(instance, traj, ref);
  summary.tau_mix = std::holds_alternative<EdppSchedule>(schedule) ||
                            std::holds_alternative<EdppFixedHorizonSchedule>(schedule)
                        ? tau
                        : chain_tau;
  summary.config = to_json(c);
  summary.version = version_string();

  std::ostringstream csv;
  write_trajectory_csv(csv, instance, traj, ref.x_star);
  const fs::path dir(c.out);
  write_file_atomic(dir / "trajectory.csv", csv.str());
  summary.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  json j = to_json(summary);
  j["schedule"] = schedule_name(schedule);
  j["reference"] = {{"x_star", std::vector<double>(ref.x_star.data(), ref.x_star.data() + ref.x_star.size())},
                    {"f_bar_star", ref.f_bar_star},
                    {"method", reference_method_name(ref.method)},
                    {"tolerance", ref.tolerance}};
  j["invariant_checks"] = traj.checks_performed;
  j["invariant_violations"] = traj.violations.size();
  write_file_atomic(dir / "summary.json", j.dump(2) + "\n");
  out << "wrote " << (dir / "trajectory.csv").string() << " and " << (dir / "summary.json").string()
      << " (" << traj.length() << " steps, " << traj.samples_consumed << " samples)\n";
  return kExitOk;
}

int cmd_fairexp(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  FairExperimentConfig config =
      as_usage([&] { return fair_config_from_toml(read_toml_file(config_path)); });
  config.threads = thread_cap();
  const FairExperimentResult result = run_experiment(config);

  const fs::path dir(out_dir);
  json algorithms = json::object();
  json final_infeasibility = json::object();
  for (const FairRunResult& run : result.runs) {
    const std::string name = algorithm_name(run.algorithm);
    std::ostringstream csv;
    write_trajectory_csv(csv, result.instance, run.trajectory, result.reference.x_star);
    write_file_atomic(dir / (name + ".csv"), csv.str());
    RunSummary s = run.summary;
    s.config = to_json(config);
    s.version = version_string();
    algorithms[name] = to_json(s);
    final_infeasibility[name] = s.final_infeasibility.front();
  }
  json j;
  j["config"] = to_json(config);
  j["version"] = version_string();
  j["tau_mix"] = result.tau_mix;
  j["delta"] = result.delta;
  j["reference"] = {{"x_star", std::vector<double>(result.reference.x_star.data(),
                                                   result.reference.x_star.data() +
                                                       result.reference.x_star.size())},
                    {"f_bar_star", result.reference.f_bar_star},
                    {"method", reference_method_name(result.reference.method)},
                    {"tolerance", result.reference.tolerance}};
  j["final_constraint_1_infeasibility"] = final_infeasibility;
  j["algorithms"] = algorithms;
  write_file_atomic(dir / "summary.json", j.dump(2) + "\n");
  for (const FairRunResult& run : result.runs) {
    out << algorithm_name(run.algorithm) << ": iterations " << run.summary.iterations
        << ", samples " << run.summary.samples << ", final gap " << run.summary.final_gap
        << ", constraint 1 infeasibility " << run.summary.final_infeasibility.front() << '\n';
  }
  return kExitOk;
}

}  // namespace

std::string version_string() { return MARKOV_DPP_VERSION; }

TransitionMatrix parse_chain_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("chain JSON: ") + e.what());
  }
  try {
    if (j.is_object() && j.contains("p")) {
      if (j.size() != 1) throw Error(ErrorCode::kParseError, "chain JSON: 'p' must be the only key");
      return TransitionMatrix::symmetric_three_state(j.at("p").get<double>());
    }
    if (!j.is_object()) return TransitionMatrix::from_rows(j.get<std::vector<std::vector<double>>>());
    for (const auto& [key, value] : j.items()) {
      if (key != "states" && key != "P" && key != "matrix") {
        throw Error(ErrorCode::kParseError, "chain JSON: unknown key '" + key + "'");
      }
    }
    if (j.contains("P") == j.contains("matrix")) {
      throw Error(ErrorCode::kParseError, "chain JSON: give exactly one of 'P', 'matrix' or 'p'");
    }
    const auto rows = j.at(j.contains("P") ? "P" : "matrix").get<std::vector<std::vector<double>>>();
    if (j.contains("states") && j.at("states").get<std::size_t>() != rows.size()) {
      throw Error(ErrorCode::kParseError, "chain JSON: 'states' does not match the matrix size");
    }
    return TransitionMatrix::from_rows(rows);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("chain JSON: ") + e.what());
  }
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Drift-plus-penalty solvers for constrained optimization with Markovian data",
               "markov-dpp"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  CLI::App* chain = app.add_subcommand("chain", "Markov chain tooling");
  chain->require_subcommand(1);
  CLI::App* mix = chain->add_subcommand("mix", "Mixing-time report for a chain given as JSON");
  ChainMixArgs mix_args;
  mix->add_option("--input", mix_args.input, "Chain JSON file")->required();
  mix->add_option("--eps", mix_args.eps, "Report tau_mix(eps) as well");
  mix->add_option("--horizon", mix_args.horizon, "Horizon T for tau_mix(1/T)");

  CLI::App* solve = app.add_subcommand("solve", "Run one schedule on a built-in instance");
  std::string config_file;
  std::optional<std::string> instance, schedule, out_path, truncation, stream;
  std::optional<double> p, beta, delta, tau_mix, slack;
  std::optional<std::size_t> horizon, cap;
  std::optional<std::uint64_t> seed;
  bool debug_asserts = false;
  solve->add_option("--config", config_file, "TOML run configuration");
  solve->add_option("--instance", instance, "synth-iid, synth-markov or fairness3");
  solve->add_option("--p", p, "Chain parameter for synth-markov and fairness3");
  solve->add_option("--fairness-slack", slack, "Constraint slack c for fairness3");
  solve->add_option("--schedule", schedule, "edpp, edpp_T, dpp_fixed, mdpp or adversarial");
  solve->add_option("--beta", beta, "Exponent beta in (0, 1/2]");
  solve->add_option("--delta", delta, "MDPP initial accumulator delta > 0");
  solve->add_option("--tau-mix", tau_mix, "Override the mixing time used by EDPP");
  solve->add_option("--T", horizon, "Number of iterations");
  solve->add_option("--seed", seed, "Top-level seed");
  solve->add_option("--out", out_path, "Output directory");
  solve->add_option("--mlmc-cap", cap, "Per-iteration MLMC sample cap (power of two)");
  solve->add_option("--truncation", truncation, "fallback or clamp");
  solve->add_option("--stream", stream, "auto, single or mlmc");
  solve->add_flag("--debug-asserts", debug_asserts, "Check the per-step lemma inequalities");

  CLI::App* fair = app.add_subcommand("fairexp", "Fairness-constrained logistic regression experiment");
  fair->require_subcommand(1);
  CLI::App* fair_run = fair->add_subcommand("run", "Run every configured algorithm");
  std::string fair_config;
  std::string fair_out;
  fair_run->add_option("--config", fair_config, "Experiment TOML")->required();
  fair_run->add_option("--out", fair_out, "Results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (mix->parsed()) return cmd_chain_mix(mix_args, out);
    if (solve->parsed()) {
      RunConfig c;
      if (!config_file.empty()) {
        c = as_usage([&] { return run_config_from_toml(read_toml_file(config_file)); });
      }
      if (instance) c.instance = *instance;
      if (p) c.p = *p;
      if (slack) c.fairness_slack = *slack;
      if (schedule) c.schedule = *schedule;
      if (beta) c.beta = *beta;
      if (delta) c.delta = *delta;
      if (tau_mix) c.tau_mix = *tau_mix;
      if (horizon) c.T = *horizon;
      if (seed) c.seed = *seed;
      if (out_path) c.out = *out_path;
      if (cap) c.mlmc_cap = *cap;
      if (truncation) c.truncation = *truncation;
      if (stream) c.stream = *stream;
      if (debug_asserts) c.debug_asserts = true;
      if (c.T < 1) throw UsageError(ErrorCode::kInvalidArgument, "--T must be >= 1");
      return cmd_solve(c, out);
    }
    if (fair_run->parsed()) return cmd_fairexp(fair_config, fair_out, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << error_code_name(e.code()) << "]: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << "error: no command given\n";
  return kExitUsage;
}

}  // namespace markov_dpp::cli

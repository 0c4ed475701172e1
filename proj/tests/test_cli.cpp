#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "commands.hpp"
#include "config.hpp"
#include "markov_dpp/error.hpp"
#include "markov_dpp/metrics.hpp"
#include "support.hpp"

namespace markov_dpp::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  args.insert(args.begin(), "markov-dpp");
  std::vector<char*> argv;
  for (std::string& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
}

TEST(Toml, ParsesSubset) {
  const TomlTable t = parse_toml(
      "# comment\n"
      "name = \"edpp\"  # trailing\n"
      "T = 2000\n"
      "beta = 0.25\n"
      "neg = -3e-2\n"
      "flag = true\n"
      "list = [\"EDPP-t\", \"MDPP\"]\n"
      "[mlmc]\n"
      "cap = 16\n");
  EXPECT_EQ(get_string(t, "name"), "edpp");
  EXPECT_EQ(get_integer(t, "T"), 2000);
  EXPECT_EQ(get_number(t, "T"), 2000.0);
  EXPECT_EQ(get_number(t, "beta"), 0.25);
  EXPECT_EQ(get_number(t, "neg"), -0.03);
  EXPECT_EQ(get_bool(t, "flag"), true);
  EXPECT_EQ(get_string_array(t, "list"), (std::vector<std::string>{"EDPP-t", "MDPP"}));
  EXPECT_EQ(get_integer(t, "mlmc.cap"), 16);
  EXPECT_FALSE(get_string(t, "missing").has_value());
}

TEST(Toml, RejectsMalformed) {
  for (const char* text : {"T = \n", "= 3\n", "x = \"open\n", "x = [1, 2\n", "x = 1\nx = 2\n",
                           "[broken\n", "x = nope\n"}) {
    try {
      parse_toml(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError) << text;
    }
  }
}

TEST(Toml, TypeMismatchAndUnknownKeys) {
  const TomlTable t = parse_toml("beta = \"half\"\n");
  EXPECT_THROW(get_number(t, "beta"), Error);
  EXPECT_THROW(run_config_from_toml(parse_toml("speed = 3\n")), Error);
  EXPECT_THROW(fair_config_from_toml(parse_toml("algorithms = [\"PD\"]\n")), Error);
}

TEST(Toml, RunConfigFields) {
  const RunConfig c = run_config_from_toml(parse_toml(
      "instance = \"synth-markov\"\np = 0.05\nschedule = \"mdpp\"\ndelta = 2.5\nT = 50\nseed = 9\n"
      "debug_asserts = true\nmlmc_cap = 16\ntruncation = \"clamp\"\n"));
  EXPECT_EQ(c.instance, "synth-markov");
  EXPECT_EQ(c.p, 0.05);
  EXPECT_EQ(c.schedule, "mdpp");
  EXPECT_EQ(c.delta, 2.5);
  EXPECT_EQ(c.T, 50u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_TRUE(c.debug_asserts);
  EXPECT_EQ(c.mlmc_cap, 16u);
  EXPECT_EQ(c.truncation, "clamp");
}

TEST(Toml, FairConfigFields) {
  const FairExperimentConfig c = fair_config_from_toml(parse_toml(
      "p = 0.01\nc = 0.4\nT = 300\nalgorithms = [\"EDPP-t\", \"MDPP\"]\nsensitive_rule = \"logistic\"\n"));
  EXPECT_EQ(c.p, 0.01);
  EXPECT_EQ(c.c, 0.4);
  EXPECT_EQ(c.T, 300u);
  ASSERT_EQ(c.algorithms.size(), 2u);
  EXPECT_EQ(c.algorithms[1], FairAlgorithm::kMdpp);
  EXPECT_EQ(c.sensitive_rule, SensitiveRule::kLogistic);
  EXPECT_THROW(fair_config_from_toml(parse_toml("p = 0.5\n")), Error);
}

TEST(AtomicWrite, ReplacesContents) {
  const fs::path dir = testing::scratch_dir("atomic");
  write_file_atomic(dir / "a.txt", "first");
  write_file_atomic(dir / "a.txt", "second");
  EXPECT_EQ(testing::read_file(dir / "a.txt"), "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
  EXPECT_EQ(files, 1u);
}

TEST(ChainJson, Forms) {
  EXPECT_EQ(parse_chain_json("[[0.9, 0.1], [0.2, 0.8]]").size(), 2u);
  EXPECT_EQ(parse_chain_json("{\"states\": 2, \"P\": [[0.9, 0.1], [0.2, 0.8]]}").size(), 2u);
  EXPECT_EQ(parse_chain_json("{\"p\": 0.1}").symmetric_three_state_parameter(), 0.1);
  EXPECT_THROW(parse_chain_json("{\"P\": [[0.9, 0.1], [0.2"), Error);
}

TEST(ChainMix, ReportsBracket) {
  const fs::path dir = testing::scratch_dir("chain_mix");
  write(dir / "chain.json", "{\"p\": 0.1}");
  const CliResult r = run({"chain", "mix", "--input", (dir / "chain.json").string(), "--horizon", "1000"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j.at("tau_mix").get<int>(), 3);
  EXPECT_LT(j.at("spectral_lower").get<double>(), 3.0);
  EXPECT_LE(3.0, j.at("spectral_upper").get<double>());
  EXPECT_NEAR(j.at("approx").get<double>(), 1.0 / 0.3, 1e-12);
  EXPECT_GE(j.at("tau_of_T").get<int>(), 3);
}

TEST(ChainMix, UsageErrors) {
  const fs::path dir = testing::scratch_dir("chain_mix_errors");
  write(dir / "bad.json", "{\"P\": [[0.5, 0.5], ");
  write(dir / "ok.json", "[[0.9, 0.1], [0.2, 0.8]]");
  write(dir / "identity.json", "[[1, 0], [0, 1]]");
  EXPECT_EQ(run({"chain", "mix", "--input", (dir / "bad.json").string()}).code, kExitUsage);
  EXPECT_EQ(run({"chain", "mix", "--input", (dir / "ok.json").string(), "--eps", "1"}).code, kExitUsage);
  EXPECT_EQ(run({"chain", "mix", "--input", (dir / "identity.json").string()}).code, kExitUsage);
  EXPECT_EQ(run({"chain", "mix", "--input", (dir / "missing.json").string()}).code, kExitUsage);
  EXPECT_EQ(run({"chain", "mix"}).code, kExitUsage);
  EXPECT_EQ(run({"bogus"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
}

TEST(Solve, SingleStepCsv) {
  const fs::path dir = testing::scratch_dir("solve_t1");
  const CliResult r = run({"solve", "--instance", "synth-iid", "--T", "1", "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::ifstream in(dir / "trajectory.csv");
  const CsvTable table = read_csv(in);
  EXPECT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.header.front(), "t");
  const json summary = json::parse(testing::read_file(dir / "summary.json"));
  EXPECT_EQ(summary.at("iterations").get<int>(), 1);
  EXPECT_FALSE(summary.at("version").get<std::string>().empty());
  EXPECT_EQ(summary.at("config").at("T").get<int>(), 1);
}

TEST(Solve, ByteIdenticalReruns) {
  const fs::path a = testing::scratch_dir("solve_a");
  const fs::path b = testing::scratch_dir("solve_b");
  for (const fs::path& dir : {a, b}) {
    const CliResult r = run({"solve", "--instance", "synth-markov", "--p", "0.05", "--schedule", "mdpp",
                             "--delta", "2", "--T", "300", "--seed", "5", "--out", dir.string()});
    ASSERT_EQ(r.code, kExitOk) << r.err;
  }
  const std::string csv = testing::read_file(a / "trajectory.csv");
  EXPECT_FALSE(csv.empty());
  EXPECT_EQ(csv, testing::read_file(b / "trajectory.csv"));
}

TEST(Solve, MdppNeedsDelta) {
  const fs::path dir = testing::scratch_dir("solve_mdpp");
  const CliResult r = run({"solve", "--schedule", "mdpp", "--T", "10", "--out", dir.string()});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("delta"), std::string::npos);
  EXPECT_NE(r.err.find("F^2/4"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(dir / "trajectory.csv"));
}

TEST(Solve, UsageErrors) {
  const fs::path dir = testing::scratch_dir("solve_usage");
  EXPECT_EQ(run({"solve", "--instance", "nope", "--out", dir.string()}).code, kExitUsage);
  EXPECT_EQ(run({"solve", "--beta", "0.7", "--out", dir.string()}).code, kExitUsage);
  EXPECT_EQ(run({"solve", "--T", "0", "--out", dir.string()}).code, kExitUsage);
  write(dir / "bad.toml", "instance = \"synth-iid\"\nunknown_key = 1\n");
  EXPECT_EQ(run({"solve", "--config", (dir / "bad.toml").string()}).code, kExitUsage);
}

TEST(Solve, ConfigFileAndOverrides) {
  const fs::path dir = testing::scratch_dir("solve_config");
  write(dir / "run.toml", "instance = \"synth-markov\"\np = 0.2\nT = 40\nseed = 2\nout = \"" +
                              (dir / "from_file").string() + "\"\n");
  ASSERT_EQ(run({"solve", "--config", (dir / "run.toml").string()}).code, kExitOk);
  EXPECT_TRUE(fs::exists(dir / "from_file" / "trajectory.csv"));
  ASSERT_EQ(run({"solve", "--config", (dir / "run.toml").string(), "--T", "7", "--out",
                 (dir / "override").string()})
                .code,
            kExitOk);
  std::ifstream in(dir / "override" / "trajectory.csv");
  EXPECT_EQ(read_csv(in).rows.size(), 7u);
}

TEST(Solve, SummaryRoundTrip) {
  const fs::path dir = testing::scratch_dir("solve_summary");
  ASSERT_EQ(run({"solve", "--instance", "synth-markov", "--T", "200", "--debug-asserts", "--out",
                 dir.string()})
                .code,
            kExitOk);
  const json j = json::parse(testing::read_file(dir / "summary.json"));
  const RunSummary s = summary_from_json(j);
  EXPECT_EQ(s.iterations, 200u);
  const json again = to_json(s);
  for (const auto& [key, value] : again.items()) EXPECT_EQ(j.at(key), value) << key;
  EXPECT_EQ(j.at("invariant_violations").get<int>(), 0);
  EXPECT_GT(j.at("invariant_checks").get<int>(), 0);
}

TEST(Fairexp, SingleAlgorithmAndSummary) {
  const fs::path dir = testing::scratch_dir("fairexp_one");
  write(dir / "exp.toml", "T = 200\npoints_per_cluster = 100\nalgorithms = [\"EDPP-t\"]\n");
  const CliResult r = run({"fairexp", "run", "--config", (dir / "exp.toml").string(), "--out",
                           (dir / "out").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  std::size_t csvs = 0;
  for (const auto& e : fs::directory_iterator(dir / "out")) csvs += e.path().extension() == ".csv";
  EXPECT_EQ(csvs, 1u);
  EXPECT_TRUE(fs::exists(dir / "out" / "EDPP-t.csv"));
  const json j = json::parse(testing::read_file(dir / "out" / "summary.json"));
  EXPECT_TRUE(j.contains("final_constraint_1_infeasibility"));
}

TEST(Fairexp, DefaultSmokeRunIsFast) {
  const fs::path dir = testing::scratch_dir("fairexp_smoke");
  write(dir / "exp.toml", "T = 500\n");
  const auto start = std::chrono::steady_clock::now();
  const CliResult r = run({"fairexp", "run", "--config", (dir / "exp.toml").string(), "--out",
                           (dir / "out").string()});
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_LT(seconds, 10.0);
  for (const char* name : {"EDPP-t", "EDPP-T", "DPP-t", "DPP-T", "MDPP"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / (std::string(name) + ".csv"))) << name;
  }
}

TEST(Fairexp, UsageErrors) {
  const fs::path dir = testing::scratch_dir("fairexp_usage");
  write(dir / "bad_p.toml", "p = 0.5\n");
  write(dir / "bad_key.toml", "horizon = 10\n");
  EXPECT_EQ(run({"fairexp", "run", "--config", (dir / "bad_p.toml").string(), "--out", dir.string()}).code,
            kExitUsage);
  EXPECT_EQ(run({"fairexp", "run", "--config", (dir / "bad_key.toml").string(), "--out", dir.string()}).code,
            kExitUsage);
  EXPECT_EQ(run({"fairexp", "run", "--out", dir.string()}).code, kExitUsage);
}

TEST(Version, NonEmpty) {
  EXPECT_FALSE(version_string().empty());
  EXPECT_EQ(run({"--version"}).code, kExitOk);
}

}  // namespace
}  // namespace markov_dpp::cli

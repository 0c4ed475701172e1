#ifndef MARKOV_DPP_TOOLS_CONFIG_HPP
#define MARKOV_DPP_TOOLS_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "markov_dpp/fairexp.hpp"
#include "markov_dpp/mlmc.hpp"
#include "markov_dpp/solver.hpp"

namespace markov_dpp::cli {

// Flat subset of TOML: `key = value` lines, optional [section] headers
// (keys become "section.key"), # comments, basic strings, integers, floats,
// booleans and single-line arrays of those.
struct TomlValue;
using TomlArray = std::vector<TomlValue>;
struct TomlValue {
  std::variant<std::string, std::int64_t, double, bool, TomlArray> data;
};
using TomlTable = std::map<std::string, TomlValue>;

// Error{kParseError} with the line number on malformed input.
TomlTable parse_toml(const std::string& text);
TomlTable read_toml_file(const std::filesystem::path& path);

// Error{kParseError} naming the first key not in `allowed`.
void reject_unknown_keys(const TomlTable& table, const std::set<std::string>& allowed);

std::optional<std::string> get_string(const TomlTable& t, const std::string& key);
std::optional<double> get_number(const TomlTable& t, const std::string& key);
std::optional<std::int64_t> get_integer(const TomlTable& t, const std::string& key);
std::optional<bool> get_bool(const TomlTable& t, const std::string& key);
std::optional<std::vector<std::string>> get_string_array(const TomlTable& t, const std::string& key);

struct RunConfig {
  std::string instance = "synth-iid";
  double p = 0.1;
  double fairness_slack = 0.5;
  std::string schedule = "edpp";
  double beta = 0.5;
  std::optional<double> delta;
  std::optional<double> tau_mix;
  std::size_t T = 1000;
  std::uint64_t seed = 0;
  std::string out = "out";
  bool debug_asserts = false;
  std::optional<std::size_t> mlmc_cap;
  std::string truncation = "fallback";
  std::string stream = "auto";
};

RunConfig run_config_from_toml(const TomlTable& table, RunConfig base = {});
FairExperimentConfig fair_config_from_toml(const TomlTable& table);

TruncationRule parse_truncation(const std::string& name);
StreamKind parse_stream(const std::string& name);

nlohmann::json to_json(const RunConfig& c);
nlohmann::json to_json(const FairExperimentConfig& c);

// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace markov_dpp::cli

#endif  // MARKOV_DPP_TOOLS_CONFIG_HPP

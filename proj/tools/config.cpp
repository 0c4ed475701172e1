#include "config.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "markov_dpp/error.hpp"

namespace markov_dpp::cli {
namespace {

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::kParseError, "config line " + std::to_string(line) + ": " + what);
}

bool is_bare_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class ValueParser {
 public:
  ValueParser(const std::string& text, std::size_t line) : s_(text), line_(line) {}

  TomlValue parse_all() {
    TomlValue v = parse_value();
    skip_space();
    if (pos_ != s_.size()) fail(line_, "unexpected trailing text '" + s_.substr(pos_) + "'");
    return v;
  }

 private:
  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t')) ++pos_;
  }

  TomlValue parse_value() {
    skip_space();
    if (pos_ >= s_.size()) fail(line_, "missing value");
    const char c = s_[pos_];
    if (c == '"') return {parse_string()};
    if (c == '[') return {parse_array()};
    if (s_.compare(pos_, 4, "true") == 0) {
      pos_ += 4;
      return {true};
    }
    if (s_.compare(pos_, 5, "false") == 0) {
      pos_ += 5;
      return {false};
    }
    return parse_number();
  }

  std::string parse_string() {
    ++pos_;
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != '"') {
      char c = s_[pos_++];
      if (c == '\\') {
        if (pos_ >= s_.size()) fail(line_, "unterminated escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(line_, std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail(line_, "unterminated string");
    ++pos_;
    return out;
  }

  TomlArray parse_array() {
    ++pos_;
    TomlArray out;
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == ']') {
      ++pos_;
      return out;
    }
    for (;;) {
      out.push_back(parse_value());
      skip_space();
      if (pos_ >= s_.size()) fail(line_, "unterminated array");
      if (s_[pos_] == ',') {
        ++pos_;
        skip_space();
        if (pos_ < s_.size() && s_[pos_] == ']') {
          ++pos_;
          return out;
        }
        continue;
      }
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      fail(line_, "expected ',' or ']' in array");
    }
  }

  TomlValue parse_number() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != ']' && s_[pos_] != ' ' &&
           s_[pos_] != '\t') {
      ++pos_;
    }
    std::string token;
    for (std::size_t k = start; k < pos_; ++k) {
      if (s_[k] != '_') token.push_back(s_[k]);
    }
    if (token.empty()) fail(line_, "missing value");
    std::string body = token;
    if (body[0] == '+') body.erase(0, 1);
    const bool is_float = body.find_first_of(".eE") != std::string::npos || body == "inf" ||
                          body == "-inf" || body == "nan";
    if (!is_float) {
      std::int64_t v = 0;
      const auto res = std::from_chars(body.data(), body.data() + body.size(), v);
      if (res.ec == std::errc() && res.ptr == body.data() + body.size()) return {v};
      fail(line_, "invalid value '" + token + "'");
    }
    double v = 0.0;
    const auto res = std::from_chars(body.data(), body.data() + body.size(), v);
    if (res.ec != std::errc() || res.ptr != body.data() + body.size()) {
      fail(line_, "invalid number '" + token + "'");
    }
    return {v};
  }

  const std::string& s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (c == '\\' && in_string) {
      ++k;
    } else if (c == '"') {
      in_string = !in_string;
    } else if (c == '#' && !in_string) {
      return line.substr(0, k);
    }
  }
  return line;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const TomlValue* find(const TomlTable& t, const std::string& key) {
  const auto it = t.find(key);
  return it == t.end() ? nullptr : &it->second;
}

[[noreturn]] void type_error(const std::string& key, const char* expected) {
  throw Error(ErrorCode::kParseError, "config key '" + key + "' must be " + expected);
}

std::size_t positive_size(const TomlTable& t, const std::string& key, std::size_t fallback) {
  const auto v = get_integer(t, key);
  if (!v) return fallback;
  if (*v < 1) throw Error(ErrorCode::kInvalidArgument, "config key '" + key + "' must be >= 1");
  return static_cast<std::size_t>(*v);
}

std::uint64_t seed_value(const TomlTable& t, const std::string& key, std::uint64_t fallback) {
  const auto v = get_integer(t, key);
  if (!v) return fallback;
  if (*v < 0) throw Error(ErrorCode::kInvalidArgument, "seed must be nonnegative");
  return static_cast<std::uint64_t>(*v);
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) fail(line_no, "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      for (char c : section) {
        if (!is_bare_key_char(c) && c != '.') fail(line_no, "invalid section name '" + section + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    for (char c : key) {
      if (!is_bare_key_char(c)) fail(line_no, "invalid key '" + key + "'");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full)) fail(line_no, "duplicate key '" + full + "'");
    const std::string value_text = trim(line.substr(eq + 1));
    table.emplace(full, ValueParser(value_text, line_no).parse_all());
  }
  return table;
}

TomlTable read_toml_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

void reject_unknown_keys(const TomlTable& table, const std::set<std::string>& allowed) {
  for (const auto& [key, value] : table) {
    if (!allowed.count(key)) throw Error(ErrorCode::kParseError, "unknown config key '" + key + "'");
  }
}

std::optional<std::string> get_string(const TomlTable& t, const std::string& key) {
  const TomlValue* v = find(t, key);
  if (!v) return std::nullopt;
  if (const auto* s = std::get_if<std::string>(&v->data)) return *s;
  type_error(key, "a string");
}

std::optional<double> get_number(const TomlTable& t, const std::string& key) {
  const TomlValue* v = find(t, key);
  if (!v) return std::nullopt;
  if (const auto* d = std::get_if<double>(&v->data)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v->data)) return static_cast<double>(*i);
  type_error(key, "a number");
}

std::optional<std::int64_t> get_integer(const TomlTable& t, const std::string& key) {
  const TomlValue* v = find(t, key);
  if (!v) return std::nullopt;
  if (const auto* i = std::get_if<std::int64_t>(&v->data)) return *i;
  type_error(key, "an integer");
}

std::optional<bool> get_bool(const TomlTable& t, const std::string& key) {
  const TomlValue* v = find(t, key);
  if (!v) return std::nullopt;
  if (const auto* b = std::get_if<bool>(&v->data)) return *b;
  type_error(key, "a boolean");
}

std::optional<std::vector<std::string>> get_string_array(const TomlTable& t, const std::string& key) {
  const TomlValue* v = find(t, key);
  if (!v) return std::nullopt;
  const auto* arr = std::get_if<TomlArray>(&v->data);
  if (!arr) type_error(key, "an array of strings");
  std::vector<std::string> out;
  for (const TomlValue& e : *arr) {
    const auto* s = std::get_if<std::string>(&e.data);
    if (!s) type_error(key, "an array of strings");
    out.push_back(*s);
  }
  return out;
}

TruncationRule parse_truncation(const std::string& name) {
  if (name == "fallback") return TruncationRule::kFallbackToOne;
  if (name == "clamp") return TruncationRule::kClamp;
  throw Error(ErrorCode::kInvalidArgument, "truncation must be 'fallback' or 'clamp'");
}

StreamKind parse_stream(const std::string& name) {
  if (name == "auto") return StreamKind::kAuto;
  if (name == "single") return StreamKind::kSingleSample;
  if (name == "mlmc") return StreamKind::kMlmc;
  throw Error(ErrorCode::kInvalidArgument, "stream must be 'auto', 'single' or 'mlmc'");
}

RunConfig run_config_from_toml(const TomlTable& table, RunConfig c) {
  reject_unknown_keys(table, {"instance", "p", "fairness_slack", "schedule", "beta", "delta",
                              "tau_mix", "T", "seed", "out", "debug_asserts", "mlmc_cap",
                              "truncation", "stream"});
  if (auto v = get_string(table, "instance")) c.instance = *v;
  if (auto v = get_number(table, "p")) c.p = *v;
  if (auto v = get_number(table, "fairness_slack")) c.fairness_slack = *v;
  if (auto v = get_string(table, "schedule")) c.schedule = *v;
  if (auto v = get_number(table, "beta")) c.beta = *v;
  if (auto v = get_number(table, "delta")) c.delta = *v;
  if (auto v = get_number(table, "tau_mix")) c.tau_mix = *v;
  c.T = positive_size(table, "T", c.T);
  c.seed = seed_value(table, "seed", c.seed);
  if (auto v = get_string(table, "out")) c.out = *v;
  if (auto v = get_bool(table, "debug_asserts")) c.debug_asserts = *v;
  if (table.count("mlmc_cap")) c.mlmc_cap = positive_size(table, "mlmc_cap", 1);
  if (auto v = get_string(table, "truncation")) c.truncation = *v;
  if (auto v = get_string(table, "stream")) c.stream = *v;
  return c;
}

FairExperimentConfig fair_config_from_toml(const TomlTable& table) {
  reject_unknown_keys(table, {"p", "c", "T", "seed", "algorithms", "beta", "tau_mix", "mlmc_cap",
                              "truncation", "delta", "sample_budget", "points_per_cluster",
                              "sensitive_rule", "debug_asserts"});
  FairExperimentConfig c;
  if (auto v = get_number(table, "p")) c.p = *v;
  if (auto v = get_number(table, "c")) c.c = *v;
  c.T = positive_size(table, "T", c.T);
  c.seed = seed_value(table, "seed", c.seed);
  if (auto v = get_string_array(table, "algorithms")) {
    c.algorithms.clear();
    for (const std::string& name : *v) c.algorithms.push_back(parse_algorithm(name));
  }
  if (auto v = get_number(table, "beta")) c.beta = *v;
  if (auto v = get_number(table, "tau_mix")) c.tau_mix = *v;
  c.mlmc_cap = positive_size(table, "mlmc_cap", c.mlmc_cap);
  if (auto v = get_string(table, "truncation")) c.truncation = parse_truncation(*v);
  if (auto v = get_number(table, "delta")) c.delta = *v;
  if (table.count("sample_budget")) c.sample_budget = positive_size(table, "sample_budget", 1);
  c.points_per_cluster = positive_size(table, "points_per_cluster", c.points_per_cluster);
  if (auto v = get_string(table, "sensitive_rule")) {
    if (*v == "likelihood") {
      c.sensitive_rule = SensitiveRule::kLikelihoodRatio;
    } else if (*v == "logistic") {
      c.sensitive_rule = SensitiveRule::kLogistic;
    } else {
      throw Error(ErrorCode::kInvalidArgument, "sensitive_rule must be 'likelihood' or 'logistic'");
    }
  }
  if (auto v = get_bool(table, "debug_asserts")) c.debug_asserts = *v;
  validate(c);
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["instance"] = c.instance;
  j["p"] = c.p;
  j["fairness_slack"] = c.fairness_slack;
  j["schedule"] = c.schedule;
  j["beta"] = c.beta;
  j["delta"] = c.delta ? nlohmann::json(*c.delta) : nlohmann::json(nullptr);
  j["tau_mix"] = c.tau_mix ? nlohmann::json(*c.tau_mix) : nlohmann::json(nullptr);
  j["T"] = c.T;
  j["seed"] = c.seed;
  j["debug_asserts"] = c.debug_asserts;
  j["mlmc_cap"] = c.mlmc_cap ? nlohmann::json(*c.mlmc_cap) : nlohmann::json(nullptr);
  j["truncation"] = c.truncation;
  j["stream"] = c.stream;
  return j;
}

nlohmann::json to_json(const FairExperimentConfig& c) {
  nlohmann::json j;
  j["p"] = c.p;
  j["c"] = c.c;
  j["T"] = c.T;
  j["seed"] = c.seed;
  std::vector<std::string> names;
  for (FairAlgorithm a : c.algorithms) names.push_back(algorithm_name(a));
  j["algorithms"] = names;
  j["beta"] = c.beta;
  j["tau_mix"] = c.tau_mix ? nlohmann::json(*c.tau_mix) : nlohmann::json(nullptr);
  j["mlmc_cap"] = c.mlmc_cap;
  j["truncation"] = c.truncation == TruncationRule::kClamp ? "clamp" : "fallback";
  j["delta"] = c.delta ? nlohmann::json(*c.delta) : nlohmann::json(nullptr);
  j["sample_budget"] = c.sample_budget ? nlohmann::json(*c.sample_budget) : nlohmann::json(nullptr);
  j["points_per_cluster"] = c.points_per_cluster;
  j["sensitive_rule"] = c.sensitive_rule == SensitiveRule::kLogistic ? "logistic" : "likelihood";
  j["debug_asserts"] = c.debug_asserts;
  return j;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error(ErrorCode::kInvalidArgument, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace markov_dpp::cli

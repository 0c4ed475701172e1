#ifndef MARKOV_DPP_TOOLS_COMMANDS_HPP
#define MARKOV_DPP_TOOLS_COMMANDS_HPP

#include <iosfwd>
#include <string>

#include "markov_dpp/chain.hpp"

namespace markov_dpp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

std::string version_string();

// Accepts {"states": n, "P": rows}, a bare list of rows, {"matrix": rows},
// or {"p": value} for the symmetric 3-state family. Error{kParseError} on
// malformed input.
TransitionMatrix parse_chain_json(const std::string& text);

// Full command line, returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace markov_dpp::cli

#endif  // MARKOV_DPP_TOOLS_COMMANDS_HPP

#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "relnav/monte_carlo.hpp"

namespace relnav {

/// Settings shared by the CLI subcommands.
struct RunConfig {
  ScenarioConfig scenario;
  EstimatorMode mode;
  int runs = 100;
  int gn_iterations = 1;
  double steady_state_start = 1.0;
  double reset_timeout = 2.0;
  std::vector<double> lambdas{3.0, 9.0, 15.0};
  std::vector<double> gammas{1.0, 0.75};
};

/// Parses `key = value` lines. '#' starts a comment; blank lines are skipped.
/// Throws InvalidArgument with origin:line on malformed input.
std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& origin);

/// Applies known keys; unknown keys and bad values throw InvalidArgument.
void apply_config(RunConfig& cfg, const std::map<std::string, std::string>& kv, const std::string& origin);

/// Reads a config file on top of the defaults. Throws Io if the file cannot be read.
RunConfig load_config(const std::string& path);

/// Keys understood by apply_config, for help output.
std::vector<std::string> config_keys();

TrackerConfig tracker_config(const RunConfig& cfg);
MonteCarloConfig monte_carlo_config(const RunConfig& cfg);

}  // namespace relnav

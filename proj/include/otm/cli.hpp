#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "otm/io.hpp"
#include "otm/pipeline.hpp"

namespace otm::cli {

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_solver = 2, exit_partial = 3 };

/// Parsed command line plus the JSON experiment record.
struct RunConfig {
  io::json doc;
  std::string base_dir;   // relative file references resolve here
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool allow_long_horizon = false;
  Scheme scheme = Scheme::midpoint;
  int quadrature_order = 5;
};

/// `model: {name, params}`; throws ConfigError for unknown names or keys.
LagrangianModel parse_model(const io::json &j);
MarginalSpec parse_marginal(const io::json &j);
/// `span: [a, b]` with one of `h` (maximal step), `intervals` or `nodes`.
TimeGrid parse_grid(const io::json &section);
BvpOptions parse_bvp_options(const io::json &doc);

/// Builds the RunConfig from the config file and command-line overrides.
RunConfig load_config(const std::string &config_path, const std::optional<std::string> &out,
                      std::optional<std::uint64_t> seed, std::optional<int> threads,
                      bool allow_long_horizon);

int cmd_bvp(const RunConfig &cfg, std::ostream &log);
int cmd_flow(const RunConfig &cfg, std::ostream &log);
int cmd_transport(const RunConfig &cfg, std::ostream &log);
int cmd_converge(const RunConfig &cfg, std::ostream &log);
int cmd_stationary(const RunConfig &cfg, std::ostream &log);

/// Full front end: argument parsing, dispatch and the exit-code mapping.
int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err);

} // namespace otm::cli

#pragma once

#include "hypocert/config.hpp"

#include <json.hpp>

#include <string>

namespace hypocert::commands {

struct Flags {
  bool n2 = false;
  bool refine = false;
  std::string fault;  // test hook: "sign-flip" (verify-sphere), "zero-S" (certify)
  bool write_files = true;
};

/// Exit code (0 pass, 1 check failure) plus the JSON report. Configuration
/// problems surface as config::ConfigError.
struct Result {
  int exit_code = 0;
  nlohmann::json report;
};

Result cmd_verify_sphere(const config::RunConfig& cfg, const Flags& flags);
Result cmd_rates(const config::RunConfig& cfg, const Flags& flags);
Result cmd_certify(const config::RunConfig& cfg, const Flags& flags);
Result cmd_simulate(const config::RunConfig& cfg, const Flags& flags);
Result cmd_decay(const config::RunConfig& cfg, const Flags& flags);
Result cmd_elliptic(const config::RunConfig& cfg, const Flags& flags);
Result cmd_gap(const config::RunConfig& cfg, const Flags& flags);

/// Runs a subcommand by its CLI name; throws ConfigError for unknown names.
Result run(const std::string& name, const config::RunConfig& cfg, const Flags& flags);

nlohmann::json config_json(const config::RunConfig& cfg);

}  // namespace hypocert::commands

#include "hypocert/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr const char* kCommands[] = {"verify-sphere", "rates", "certify", "simulate", "decay", "elliptic", "gap"};

}  // namespace

int main(int argc, char** argv) {
  using namespace hypocert;

  CLI::App app{"hypocoercivity certificates and fiber lay-down diagnostics"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  commands::Flags flags;
  bool quiet = false;

  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "override sampler.seed");
  app.add_option("--out", out, "override output.dir");
  app.add_flag("--n2", flags.n2, "estimate N2 with the elliptic solver (rates)");
  app.add_flag("--refine", flags.refine, "repeat on a refined grid and report convergence");
  app.add_option("--fault", flags.fault, "test hook")->group("");
  app.add_flag("--quiet", quiet, "do not echo the JSON report");

  for (const char* name : kCommands) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    auto cfg = config_path.empty() ? config::RunConfig{} : config::load(config_path);
    if (seed) cfg.sampler.seed = *seed;
    if (!out.empty()) cfg.out_dir = out;
    const std::string name = app.get_subcommands().front()->get_name();
    const auto res = commands::run(name, cfg, flags);
    if (!quiet) std::cout << res.report.dump(2) << "\n";
    if (res.exit_code != 0) std::cerr << name << ": check failed\n";
    return res.exit_code;
  } catch (const config::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

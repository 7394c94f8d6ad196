// convolve: command line front end for the rate, inequality and probe experiments.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "convolve/cli_runner.hpp"
#include "convolve/errors.hpp"

namespace {

struct RunFlags {
  std::string config;
  std::string out = "results";
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
  std::optional<std::int64_t> sample_cap;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--config", flags.config, "config file (TOML or JSON) or registry name")
      ->required()
      ->envname("CONVOLVE_CONFIG");
  cmd->add_option("--out", flags.out, "output directory")->envname("CONVOLVE_OUT")->capture_default_str();
  cmd->add_option("--seed", flags.seed, "replaces the config seed")->envname("CONVOLVE_SEED");
  cmd->add_option("--workers", flags.workers, "worker threads, 0 for all cores")
      ->envname("CONVOLVE_WORKERS")
      ->capture_default_str();
  cmd->add_option("--sample-cap", flags.sample_cap, "caps the Monte Carlo sample count M")
      ->envname("CONVOLVE_SAMPLE_CAP")
      ->check(CLI::PositiveNumber);
}

int run(const RunFlags& flags, const std::string& kind) {
  const convolve::Json config = convolve::resolve_config(flags.config, kind);
  convolve::RunOptions options;
  options.out = flags.out;
  options.seed = flags.seed;
  options.workers = flags.workers;
  options.expected_kind = kind;
  options.sample_cap = flags.sample_cap;
  const convolve::RunOutcome outcome = convolve::run_experiment(config, options);
  std::cout << outcome.experiment << ": " << (outcome.passed ? "PASS" : "FAIL") << "\n";
  for (const auto& path : outcome.outputs) std::cout << "  " << path.string() << "\n";
  return outcome.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo experiments for discretised stochastic evolution equations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", convolve::tool_version);

  RunFlags flags;
  CLI::App* rates = app.add_subcommand("rates", "convergence rates of time discretisations");
  CLI::App* ineq = app.add_subcommand("ineq", "maximal inequality trials");
  CLI::App* probe = app.add_subcommand("probe", "deterministic scheme probes");
  for (CLI::App* cmd : {rates, ineq, probe}) add_run_flags(cmd, flags);

  CLI::App* list = app.add_subcommand("list", "print the experiment registry");
  std::string plot_out = "results";
  CLI::App* plot = app.add_subcommand("plot-data", "write plot_manifest.json for the plotting scripts");
  plot->add_option("--out", plot_out, "results directory")->envname("CONVOLVE_OUT")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (list->parsed()) {
      for (const convolve::RegistryEntry& e : convolve::experiment_registry()) {
        std::cout << e.name << "\t" << e.summary << "\n";
      }
      return 0;
    }
    if (plot->parsed()) {
      const convolve::PlotDataResult res = convolve::write_plot_manifest(plot_out);
      std::cout << res.manifest.string() << " (" << res.entries << " plots)\n";
      return 0;
    }
    if (rates->parsed()) return run(flags, "rates");
    if (ineq->parsed()) return run(flags, "ineq");
    return run(flags, "probe");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

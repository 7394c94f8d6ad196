#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "convolve/config_io.hpp"

namespace convolve {

inline constexpr const char* tool_version = "0.1.0";
inline constexpr int manifest_schema_version = 1;

struct RegistryEntry {
  std::string name;  // e.g. rates:heat:splitting
  std::string kind;  // rates, ineq or probe
  std::string summary;
};

const std::vector<RegistryEntry>& experiment_registry();
const RegistryEntry* find_experiment(std::string_view name);

/// Directory of the shipped default configs: $CONVOLVE_CONFIG_DIR if set,
/// otherwise the configs/ directory of the source tree.
std::filesystem::path default_config_dir();
// rates:heat:splitting -> <dir>/rates_heat_splitting.toml
std::filesystem::path default_config_path(std::string_view name);
// File stem used for outputs: ':' becomes '_'.
std::string experiment_slug(std::string_view name);

struct RunOptions {
  std::filesystem::path out = "results";
  std::optional<std::uint64_t> seed;        // replaces the config seed
  unsigned workers = 0;                     // 0: one per hardware thread
  std::optional<std::string> expected_kind;  // set by the rates/ineq/probe subcommands
  std::optional<std::int64_t> sample_cap;   // caps M, for quick smoke runs
};

struct RunOutcome {
  std::string experiment;
  std::string kind;
  std::string config_hash;
  bool passed = false;
  Json summary;
  std::vector<std::filesystem::path> outputs;  // CSV and JSON files, manifest last

  int exit_code() const { return passed ? 0 : 2; }
};

/**
 * Runs one experiment and writes <slug>.csv, <slug>.json and
 * <slug>.manifest.json (plus <slug>_tail.csv for tail trials) under out.
 * Config problems throw ConfigError (or another Error) before any file is written.
 */
RunOutcome run_experiment(const Json& config, const RunOptions& options);

/// Loads a config file, or the shipped default when the argument is a registry
/// name. A bare file name that does not exist is looked up in the config
/// directory, also as <kind>_<name> (so heat_splitting.toml finds
/// rates_heat_splitting.toml).
Json resolve_config(const std::string& path_or_name, const std::optional<std::string>& kind = std::nullopt);

struct PlotDataResult {
  std::filesystem::path manifest;
  std::size_t entries = 0;
};

/// Scans out for result CSVs and writes plot_manifest.json for the plotting scripts.
PlotDataResult write_plot_manifest(const std::filesystem::path& out);

// %.17g, with inf and nan spelled out.
std::string format_double(double x);

}  // namespace convolve

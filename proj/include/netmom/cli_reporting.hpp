#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "netmom/backtest.hpp"
#include "netmom/market_data.hpp"

namespace netmom {

inline constexpr std::string_view kCodeVersion = "netmom 0.1.0";

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

struct RunPaths {
  std::filesystem::path universe;
  std::filesystem::path prices;
  std::filesystem::path output;
};

/// Everything a run needs. Defaults reproduce the full protocol on the supplied data.
struct RunConfig {
  RunPaths paths;
  std::uint64_t seed = 0;
  int jobs = 1;
  WinsorSpec winsor;
  std::vector<double> alpha_axis{kHyperParamAxis.begin(), kHyperParamAxis.end()};
  std::vector<double> beta_axis{kHyperParamAxis.begin(), kHyperParamAxis.end()};
  /// Graph pipeline, strategies, splits and costs; backtest.grid follows the two axes.
  BacktestConfig backtest;
  int clusters = 4;
  SynthConfig synth;

  /// Range checks; `need_inputs` also requires the universe file and price directory.
  void validate(bool need_inputs = true) const;
};

/// Command-line overrides applied on top of the file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> stride;
  std::optional<int> jobs;
};

/// Reads a JSON config. Relative paths resolve against the file's directory; unknown
/// keys are rejected.
RunConfig load_run_config(const std::filesystem::path& path, const RunOverrides& overrides = {});
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir,
                           const RunOverrides& overrides = {});

/// Canonical JSON of every setting except the output directory.
std::string canonical_config(const RunConfig& config);
std::string config_hash(const RunConfig& config);

/// Identity of the inputs the graph store depends on: prices, classes and graph settings.
std::string graph_store_key(const RunConfig& config, const MarketData& market);

struct ManifestEntry {
  std::string path;
  std::uintmax_t bytes = 0;
  std::string fnv1a;
};

struct RunManifest {
  std::string stage;
  std::string config_hash;
  std::string code_version{kCodeVersion};
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> files;

  std::string json() const;
};

/// Lists `files` (relative to `dir`) with sizes and hashes, writes `<dir>/manifest.json`
/// and returns the manifest.
RunManifest write_manifest(const std::filesystem::path& dir, std::string stage, const RunConfig& config,
                           std::vector<std::string> files);

struct CommandOptions {
  bool resume = false;
};

/// Stage commands. Each writes into `<output>/<stage>/` and throws ConfigError,
/// DataError or SolverBudgetError.
void cmd_synth(const RunConfig& config);
void cmd_ingest(const RunConfig& config);
void cmd_features(const RunConfig& config);
void cmd_graphs(const RunConfig& config, const CommandOptions& options = {});
void cmd_backtest(const RunConfig& config);
void cmd_report(const RunConfig& config);

/// 0 success, 2 config error, 3 data error, 4 solver budget exceeded, 1 anything else.
int exit_code_for(const std::exception& e);

/// Per-class coverage of a loaded panel.
struct ClassCoverage {
  std::string asset_class;
  int assets = 0;
  std::size_t observations = 0;
  std::size_t missing = 0;
  Date first;
  Date last;
};
std::vector<ClassCoverage> coverage_by_class(const PricePanel& panel);

/// Loads the universe and prices named by the config and derives the market.
MarketData load_market(const RunConfig& config);

}  // namespace netmom

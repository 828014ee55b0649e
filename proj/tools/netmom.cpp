#include <CLI11.hpp>
#include <iostream>

#include "netmom/cli_reporting.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> stride;
  std::optional<int> jobs;
  bool resume = false;
};

void add_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "JSON run configuration")->required();
  cmd->add_option("--seed", flags.seed, "Random seed (overrides the config)");
  cmd->add_option("--stride", flags.stride, "Graph recompute stride in trading days");
  cmd->add_option("--jobs", flags.jobs, "Worker threads");
  cmd->add_flag("--resume", flags.resume, "Reuse graphs already in the store");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network momentum research pipeline"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"synth", "Generate a synthetic block-factor market"},
      {"ingest", "Load and align prices, report coverage"},
      {"features", "Compute momentum features"},
      {"graphs", "Learn walk-forward graphs into the graph store"},
      {"backtest", "Run strategies and ablations out of sample"},
      {"report", "Collect stage outputs and figure data"},
  };
  for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    netmom::RunOverrides overrides{flags.seed, flags.stride, flags.jobs};
    const auto config = netmom::load_run_config(flags.config, overrides);
    config.validate(command != "synth");
    if (command == "synth") netmom::cmd_synth(config);
    else if (command == "ingest") netmom::cmd_ingest(config);
    else if (command == "features") netmom::cmd_features(config);
    else if (command == "graphs") netmom::cmd_graphs(config, {flags.resume});
    else if (command == "backtest") netmom::cmd_backtest(config);
    else netmom::cmd_report(config);
  } catch (const std::exception& e) {
    const int code = netmom::exit_code_for(e);
    std::cerr << "netmom " << command << ": " << e.what() << '\n';
    return code;
  }
  return 0;
}

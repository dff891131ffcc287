#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qgens/commands.hpp"
#include "qgens/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic quasi-geostrophic enstrophy simulator"};
  app.set_version_flag("--version", qgens::version());
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  using Command = std::function<int(const qgens::CommandOptions&)>;
  const std::map<std::string, std::pair<std::string, Command>> commands{
      {"simulate", {"Run the ensemble and write trace.csv", qgens::cmd_simulate}},
      {"verify-linear", {"Compare a linearized run with the closed-form oracle", qgens::cmd_verify_linear}},
      {"bounds", {"Check the enstrophy envelopes", qgens::cmd_bounds}},
      {"holder", {"Fit the Hoelder exponent of Ens(t)", qgens::cmd_holder}},
      {"asymptotics", {"Check small-time behaviour of Ens(t)", qgens::cmd_asymptotics}},
  };

  std::map<std::string, CLI::App*> subs;
  std::map<std::string, CLI::Option*> paths_opt;
  std::map<std::string, CLI::Option*> seed_opt;
  std::map<std::string, CLI::Option*> out_opt;
  for (const auto& [name, entry] : commands) {
    CLI::App* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    out_opt[name] = sub->add_option("--out", out_dir, "Output directory (overrides io.out_dir)");
    paths_opt[name] = sub->add_option("--paths", paths, "Number of paths (overrides sim.n_paths)");
    seed_opt[name] = sub->add_option("--seed", seed, "Master seed (overrides sim.master_seed)");
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qgens::kExitConfig;
  }

  for (const auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    qgens::CommandOptions options;
    options.config_path = config;
    if (out_opt[name]->count()) options.out_dir = out_dir;
    if (paths_opt[name]->count()) options.paths = paths;
    if (seed_opt[name]->count()) options.seed = seed;
    options.threads = threads;
    return commands.at(name).second(options);
  }
  return qgens::kExitConfig;
}

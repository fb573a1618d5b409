#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "heavyball/experiments.hpp"

// Experiment front end. Subcommands map one-to-one onto the experiment
// runners; a config file provides the per-experiment fields and the flags
// override it. Exit code 0 iff every certification in scope passed or was
// explicitly diagnostic.
int main(int argc, char** argv) {
  CLI::App app{"heavyball: momentum acceleration experiments and bound certification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int workers = -1;

  const std::vector<std::string> names = {"quadratic", "f2-local",    "relu",
                                          "deep-linear", "bound-check", "sweep"};
  for (const auto& name : names) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "config file (key = value lines)");
    sub->add_option("--seed", seed, "master seed (overrides config)");
    sub->add_option("--out", out_dir, "output directory (overrides config)");
    sub->add_option("--workers", workers, "sweep worker cap (overrides config)");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    heavyball::ExperimentConfig config;
    if (!config_path.empty()) config = heavyball::parse_config_file(config_path);
    const std::string chosen = app.get_subcommands().front()->get_name();
    if (!config.experiment.empty() && config.experiment != chosen)
      throw heavyball::ValidationError("config experiment '" + config.experiment +
                                       "' does not match subcommand '" + chosen + "'");
    config.experiment = chosen;
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    if (!out_dir.empty()) config.out = out_dir;
    if (workers > 0) config.workers = workers;
    return heavyball::run_experiment(config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

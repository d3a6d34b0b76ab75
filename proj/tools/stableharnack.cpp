// Command-line front end: run, sweep and validate experiment configs.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stable/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Symmetric stable processes: Green functions, exits and Harnack/Hoelder checks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, glob_pattern, table_path;
  std::uint64_t seed = 0;

  CLI::App* run = app.add_subcommand("run", "run one experiment config");
  run->add_option("--config", config_path, "config file")->required();
  CLI::Option* seed_opt = run->add_option("--seed", seed, "override [task] seed");
  CLI::Option* out_opt = run->add_option("--out", out_dir, "override [output] dir");

  CLI::App* sweep = app.add_subcommand("sweep", "run configs sharing a task and tabulate headline numbers");
  sweep->add_option("--configs", glob_pattern, "glob of config files")->required();
  sweep->add_option("--table", table_path, "also write the table to this CSV file");

  CLI::App* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("--config", config_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      stable::ExperimentConfig config = stable::load_config(config_path);
      if (*seed_opt) config.seed = seed;
      if (*out_opt) config.output_dir = out_dir;
      return static_cast<int>(stable::run_experiment(config, std::cerr).status);
    }
    if (*sweep) {
      return stable::run_sweep(stable::expand_glob(glob_pattern), table_path, std::cout, std::cerr);
    }
    stable::ExperimentConfig config = stable::load_config(config_path);
    stable::validate_config(config);
    std::cout << config_path << ": ok (task " << config.task << ")\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

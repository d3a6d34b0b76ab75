#pragma once

// Config-driven runs: INI-style files with sections [model], [task],
// [params], [grid], [scheme] and [output]. Unknown sections or keys are
// rejected. A run writes manifest.json, report.json and the task's CSV series.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stable/core_model.hpp"
#include "stable/serialize.hpp"

namespace stable {

struct ExperimentConfig {
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string source;  // file the config came from, if any
  std::string task;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  /// Value of section.key, or `fallback` when absent.
  std::string get(const std::string& section, const std::string& key, const std::string& fallback = {}) const;
  double number(const std::string& section, const std::string& key, double fallback) const;
  long integer(const std::string& section, const std::string& key, long fallback) const;
  bool has(const std::string& section, const std::string& key) const;
};

/// Parses and checks the key names and the task; throws Config.
ExperimentConfig parse_config(const std::string& text, const std::string& source = {});
ExperimentConfig load_config(const std::string& path);

/// Builds the model and re-checks every parameter constraint without running
/// the task; throws Config or the module's error.
void validate_config(const ExperimentConfig& config);

StableModel build_model(const ExperimentConfig& config);

enum class RunStatus { Ok = 0, Error = 1, Inconclusive = 2 };

struct RunResult {
  RunStatus status = RunStatus::Ok;
  Json report;
  std::map<std::string, double> headline;  // numbers for sweep tables
  std::map<std::string, std::string> csv;  // file name -> content
  std::string message;
};

/// Runs the task in memory.
RunResult execute(const ExperimentConfig& config);

/// Runs the task and writes manifest.json, report.json and the CSV files into
/// config.output_dir. Errors are caught and reported through the status.
RunResult run_experiment(const ExperimentConfig& config, std::ostream& log);

/// One row per config with the headline numbers; configs must share a task.
/// Writes the table to `table_path` when it is not empty. Returns the exit status.
int run_sweep(const std::vector<std::string>& config_paths, const std::string& table_path, std::ostream& out,
              std::ostream& log);

/// Config paths matching a shell glob, sorted.
std::vector<std::string> expand_glob(const std::string& pattern);

}  // namespace stable

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "heavyball/common.hpp"

namespace heavyball {

/// Parsed experiment configuration. The file format is line-oriented
/// `key = value` with `#` comments; unknown keys are rejected per experiment
/// (strict parsing), and every run echoes its canonical config into the
/// output directory.
struct ExperimentConfig {
  std::string experiment;  // quadratic | f2-local | relu | deep-linear | bound-check | sweep
  std::uint64_t seed = 42;
  std::filesystem::path out = "runs";
  int workers = 1;
  std::map<std::string, std::string> fields;

  // Typed access with defaults; throws ValidationError on malformed values.
  int get_int(const std::string& key, int def) const;
  double get_double(const std::string& key, double def) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& def) const;
  std::vector<int> get_int_list(const std::string& key, const std::vector<int>& def) const;
  std::string get_string(const std::string& key, const std::string& def) const;

  /// Rejects keys outside the experiment's schema; names the offender.
  void validate_keys() const;
  /// Canonical text: sorted `key = value` lines; hashed into the manifest.
  std::string canonical_text() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& text);

struct RunManifest {
  std::string experiment;
  std::string config_hash;
  std::string version;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::string> files;
  bool passed = false;
  std::vector<std::string> notes;

  std::string to_json() const;
};

struct CommandResult {
  bool passed = false;
  std::vector<std::string> files;  // paths relative to the output directory
  std::vector<std::string> notes;
};

CommandResult cmd_quadratic(const ExperimentConfig& config);
CommandResult cmd_f2_local(const ExperimentConfig& config);
CommandResult cmd_relu(const ExperimentConfig& config);
CommandResult cmd_deep_linear(const ExperimentConfig& config);
CommandResult cmd_bound_check(const ExperimentConfig& config);
CommandResult cmd_sweep(const ExperimentConfig& config);

/// Dispatches, echoes the config, writes the manifest. Returns the process
/// exit code: 0 iff every certification in scope passed or was explicitly
/// diagnostic.
int run_experiment(const ExperimentConfig& config);

extern const char* kVersion;

}  // namespace heavyball

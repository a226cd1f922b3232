#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgla/train.hpp"

namespace sgla {

/// Every validation failure, one "section.key: message" line each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct EvalConfig {
  int sequences = 10;
  int sequence_length = 60;
  std::uint64_t seed = 1001;
  bool hanning = true;
};

struct BenchConfig {
  int frames = 200;
  int warmup = 20;
};

struct RunConfig {
  std::string preset = "toy";
  TrackerConfig model = toy_preset();
  SaturationPolicy saturation = SaturationPolicy::direct(4);
  TrainConfig train;
  EvalConfig eval;
  BenchConfig bench;
  std::filesystem::path output_dir = "out";

  /// Tracking options matching this config.
  TrackOptions track_options() const;
};

/// Flat "section.key" -> value view of an INI document.
using ConfigEntries = std::map<std::string, std::string>;

/// Parses `[section]` headers and `key = value` lines; `#` and `;` start
/// comments. Syntax errors carry line numbers.
ConfigEntries parse_ini(const std::string& text);

/// "section.key=value" from a command-line override.
std::pair<std::string, std::string> parse_override(const std::string& text);

/// Builds and validates a RunConfig. `model.preset` is applied first so the
/// remaining model keys override individual preset fields.
RunConfig build_run_config(const ConfigEntries& entries);

/// Reads `path`, applies overrides in order, validates.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// Keys understood by build_run_config, for help text and tests.
std::vector<std::string> known_config_keys();

}  // namespace sgla

// Experiment orchestration: run, scan, compare and replay.
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vibrolab/harness/artifacts.hpp"
#include "vibrolab/harness/config.hpp"

namespace vibro::harness {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitInvalid = 2, kExitGate = 3 };

struct ExperimentInfo {
  std::string kind;
  std::string description;
};
const std::vector<ExperimentInfo>& experiment_catalog();

inline constexpr const char* kOutputRootEnv = "VIBROLAB_OUTPUT_ROOT";

// The environment variable wins over the configured output root.
std::filesystem::path output_root(const RunConfig& cfg);

struct RunOutcome {
  int exit_code = kExitOk;
  std::filesystem::path dir;
  json summary;
  std::vector<std::string> messages;
};

// Runs any experiment kind (scan included) into dir, or output_root/name.
// Throws ConfigError on validation problems.
RunOutcome run(const RunConfig& cfg, const std::optional<std::filesystem::path>& dir = std::nullopt);

struct CompareOptions {
  std::string kind = "channels";  // channels | diagonal | bimodality | curves
  double angle = 0.0;             // electronic frame rotation for the diagonal kind
};
inline const std::vector<std::string>& compare_kinds() {
  static const std::vector<std::string> k{"channels", "diagonal", "bimodality", "curves"};
  return k;
}

// Incompatible inputs throw ConfigError.
json compare(const std::vector<std::filesystem::path>& artifacts, const CompareOptions& opts);

struct ReplayReport {
  bool identical = false;
  std::string recorded_digest;
  std::string replay_digest;
  std::filesystem::path dir;
  int exit_code = kExitOk;
};

ReplayReport replay(const std::filesystem::path& manifest,
                    const std::optional<std::filesystem::path>& dir = std::nullopt);

}  // namespace vibro::harness

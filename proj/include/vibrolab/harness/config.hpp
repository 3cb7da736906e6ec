// Run configuration: a sectioned key = value format with strict parsing.
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "vibrolab/exact.hpp"
#include "vibrolab/grid.hpp"
#include "vibrolab/models.hpp"

namespace vibro::harness {

// Carries every problem found, not just the first.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

struct PointerSpec {
  int dim_a = 2;
  int dim_e = 3;
  std::size_t steps = 100;
  double rotation = 0.78539816339744831;  // mixture frame angle for the non-pointer comparison
  std::uint64_t unitary_seed = 3;
};

struct SchemeSpec {
  std::size_t n_traj = 1000;  // fssh ensemble size, or per-branch count for mixtures
  double dt = 0.0;            // 0: integrator dt
  std::string frustrated = "reject";
  bool coherent = true;
  double basis_rotation = 0.0;
  double merge_dt = -1.0;
  double merge_dx = -1.0;
  bool merge_same_surface = false;
  double amplitude_floor = 1e-4;
  std::size_t branch_cap = 64;
  double prune_budget = 1e-3;
  double window_margin = 0.5;
  double mask_threshold = -1.0;
  double energy_gate = 1e-6;
  bool keep_history = false;
};

struct ScanSpec {
  std::string parameter = "k0";  // k0, x0, sigma or model.<param>
  std::vector<double> values;
  std::vector<std::string> schemes;  // exact, fssh, hybrid-coherent, hybrid-incoherent, mixture
  std::string focus;                 // channel tracked by the oscillation metrics; empty: last channel
  bool scale_horizon = false;        // k0 sweeps: n_steps scaled by values[0] / k0
};

struct CompareSpec {
  std::vector<std::string> artifacts;  // run directories
  std::string kind = "channels";
  double angle = 0.0;
};

struct RunConfig {
  std::string experiment;
  std::string name = "run";
  std::uint64_t seed = 1;
  std::string output = "runs";

  std::string model = "single_crossing";
  ParamMap model_params;

  SpatialGrid grid;
  exact::PacketSpec packet;  // amplitudes are kept separately below
  std::vector<double> amplitudes;  // magnitudes; empty: single state
  std::vector<double> phases;      // radians, same length as amplitudes or empty

  double dt = 0.5;
  std::size_t n_steps = 1000;
  std::size_t stride = 10;
  double absorb_width = 0.0;

  SchemeSpec scheme;
  std::vector<exact::ChannelSpec> channels;
  ScanSpec scan;
  PointerSpec pointer;
  CompareSpec compare;

  double scheme_dt() const { return scheme.dt > 0.0 ? scheme.dt : dt; }
  double horizon() const { return dt * static_cast<double>(n_steps); }
  exact::PacketSpec packet_spec() const;
  std::vector<cd> complex_amplitudes() const;
};

const std::vector<std::string>& experiment_kinds();
const std::vector<std::string>& scan_schemes();

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);
// Canonical text that parses back to the same configuration.
std::string echo_config(const RunConfig& cfg);
// Semantic checks beyond syntax (model construction, ranges); throws ConfigError.
void validate(const RunConfig& cfg);

}  // namespace vibro::harness

// Mixed quantum-classical engines: Ehrenfest, fewest-switches surface
// hopping, classical mixtures and the branching-window hybrid.
#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vibrolab/exact.hpp"
#include "vibrolab/kernels.hpp"
#include "vibrolab/local_electronic.hpp"
#include "vibrolab/surfaces.hpp"

namespace vibro::mqc {

using cd = std::complex<double>;

std::uint64_t splitmix64(std::uint64_t& state);
// Independent generator for trajectory `index` under a global seed.
std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index);

struct TrajectorySample {
  double time = 0.0;
  double x = 0.0;
  double p = 0.0;
  double energy = 0.0;
  int active = 0;
  std::vector<double> populations;  // adiabatic |c_n|^2
};

struct Trajectory {
  double x = 0.0;
  double p = 0.0;
  double time = 0.0;
  int active = 0;
  SmallCVec amp;  // adiabatic for hopping/mixtures, diabatic for Ehrenfest
  double phase = 0.0;
  double weight = 1.0;
  std::mt19937_64 rng;
  bool alive = true;
  std::vector<TrajectorySample> history;
};

struct PhaseSpaceSpec {
  double x0 = -10.0;
  double k0 = 20.0;
  double sigma = 1.0;  // position width; momentum width is 1/(2 sigma)
};

struct ChannelStats {
  std::vector<std::string> names;
  std::vector<double> probabilities;
  std::vector<double> std_error;
  double unassigned = 0.0;
};

struct EnsembleSample {
  double time = 0.0;
  Eigen::MatrixXcd rho_el;               // adiabatic basis, weight-averaged
  std::vector<double> surface_fraction;  // weight on each active surface
};

struct EnsembleResult {
  std::string scheme;
  std::uint64_t seed = 0;
  int n_states = 2;
  std::vector<Trajectory> trajectories;
  std::vector<EnsembleSample> series;
  ChannelStats channels;
  std::size_t hops = 0;
  std::size_t frustrated = 0;
  double frustrated_fraction = 0.0;
  double max_energy_error = 0.0;  // relative, between hops
  std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------

struct EhrenfestOptions {
  double dt = 0.5;
  std::size_t n_steps = 1000;
  std::size_t stride = 10;
  double energy_gate = 1e-6;
  double x_lo = -std::numeric_limits<double>::infinity();  // stop once outside
  double x_hi = std::numeric_limits<double>::infinity();
};

struct EhrenfestResult {
  std::vector<TrajectorySample> series;
  Trajectory final;
  double max_energy_error = 0.0;
  bool aborted = false;
  std::string diagnostic;
  // The mean-field state is a product of one nuclear point and one electronic vector.
  double entanglement_entropy() const { return 0.0; }
};

// el_amp0 is given in the diabatic basis.
EhrenfestResult ehrenfest_run(double x0, double p0, const SmallCVec& el_amp0, const DiabaticModel& model,
                              const EhrenfestOptions& opts);

// ---------------------------------------------------------------------------

enum class FrustratedPolicy { reject, reverse };

struct FsshOptions {
  std::size_t n_traj = 1000;
  PhaseSpaceSpec sampling;
  int initial_surface = 0;
  double dt = 1.0;
  std::size_t n_steps = 4000;
  std::size_t stride = 0;  // 0: no series
  std::uint64_t seed = 1;
  double x_lo = -std::numeric_limits<double>::infinity();
  double x_hi = std::numeric_limits<double>::infinity();
  std::vector<exact::ChannelSpec> channels;
  FrustratedPolicy frustrated = FrustratedPolicy::reject;
  bool keep_history = false;
  kernels::Exec exec = kernels::Exec::parallel;
};

EnsembleResult fssh_run(const DiabaticModel& model, const FsshOptions& opts);

// ---------------------------------------------------------------------------

struct MixtureOptions {
  std::vector<cd> amplitudes{cd(1.0, 0.0), cd(0.0, 0.0)};  // initial adiabatic amplitudes
  double basis_rotation = 0.0;  // 0: pointer (adiabatic) basis; otherwise rotated 2-state basis
  std::size_t n_traj_per_branch = 500;
  PhaseSpaceSpec sampling;
  double dt = 1.0;
  std::size_t n_steps = 4000;
  std::size_t stride = 0;
  std::uint64_t seed = 1;
  double x_lo = -std::numeric_limits<double>::infinity();
  double x_hi = std::numeric_limits<double>::infinity();
  std::vector<exact::ChannelSpec> channels;
  bool keep_history = false;
  kernels::Exec exec = kernels::Exec::parallel;
};

// Branch basis vectors (columns, adiabatic components) and weights used by a mixture.
void mixture_basis(const MixtureOptions& opts, int n_states, Eigen::MatrixXd& basis, std::vector<double>& weights);

EnsembleResult classical_mixture_run(const DiabaticModel& model, const MixtureOptions& opts);

// ---------------------------------------------------------------------------

struct HybridOptions {
  double dt = 1.0;
  double t_max = 10000.0;
  double x_lo = -std::numeric_limits<double>::infinity();
  double x_hi = std::numeric_limits<double>::infinity();
  double mask_threshold = -1.0;  // < 0: relative default
  double window_margin = 0.5;
  double amplitude_floor = 1e-4;
  bool coherent = true;
  double sigma = 1.0;      // reference packet width for merge tolerances
  double merge_dt = -1.0;  // < 0: 2 sigma M / p0
  double merge_dx = -1.0;  // < 0: sigma / 2
  bool merge_require_same_surface = false;
  std::size_t branch_cap = 64;
  double prune_budget = 1e-3;
  std::size_t max_events = 100000;
  std::vector<exact::ChannelSpec> channels;
};

struct BranchInit {
  double x0 = -10.0;
  double p0 = 20.0;
  int surface = 0;
};

enum class BranchStatus { free, parked, consumed, finished, pruned, closed };

struct BranchRecord {
  int id = 0;
  int parent = -1;
  std::vector<int> merged_from;  // branches summed into the parent's window pass
  double x = 0.0;
  double p = 0.0;
  double time = 0.0;
  int surface = 0;
  double weight = 0.0;
  double phase = 0.0;  // accumulated action phase
  BranchStatus status = BranchStatus::free;
  int window = -1;      // spawn window
  int park_window = -1;
  int park_direction = 0;
  std::vector<cd> entry_amplitudes;
  std::vector<cd> exit_amplitudes;
};

struct HybridResult {
  std::vector<BranchRecord> branches;
  std::vector<int> leaves;
  std::vector<bo::Window> windows;
  ChannelStats channels;
  double closed_weight = 0.0;  // dropped as energetically closed
  double pruned_weight = 0.0;
  bool low_fidelity = false;
  std::size_t window_passes = 0;
  std::size_t merges = 0;
  std::vector<std::string> log;
};

HybridResult hybrid_run(const BranchInit& init, const DiabaticModel& model, const bo::AdiabaticSurfaces& surfaces,
                        const HybridOptions& opts);

// Channel tallies shared by the ensemble engines.
ChannelStats tally_channels(const std::vector<exact::ChannelSpec>& channels, const std::vector<double>& x,
                            const std::vector<std::vector<double>>& surface_weights, std::size_t n_samples);

}  // namespace vibro::mqc

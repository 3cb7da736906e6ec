// Split-operator grid propagation of the coupled wavefunction, branch
// decomposition and checks of the coupling-free reduced dynamics.
#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vibrolab/kernels.hpp"
#include "vibrolab/models.hpp"
#include "vibrolab/surfaces.hpp"
#include "vibrolab/wavefunction.hpp"

namespace vibro::exact {

struct PacketSpec {
  double x0 = -10.0;
  double k0 = 20.0;
  double sigma = 1.0;
  int state = 0;
  std::vector<cd> amplitudes;  // optional: same packet on every state with these unit-norm weights
};

// exp(-(x-x0)^2 / (4 sigma^2) + i k0 x) on one electronic state, normalized on the grid.
VibronicWavefunction gaussian_packet(const SpatialGrid& grid, int n_states, const PacketSpec& spec,
                                     Representation rep = Representation::diabatic);

struct Moments {
  double weight = 0.0;
  double x_mean = 0.0;
  double x_var = 0.0;
  double p_mean = 0.0;
  double kinetic = 0.0;  // <p^2>/2M per unit weight
};

// Moments of a single component; momenta through the discrete transform.
Moments moments(const cd* chi, const SpatialGrid& grid, double mass);

struct PropagatorOptions {
  kernels::Exec exec = kernels::Exec::parallel;
  double absorb_width = 0.0;  // cosine ramp at both edges; 0 disables
};

class SplitOperator {
 public:
  SplitOperator(const DiabaticModel& model, const SpatialGrid& grid, double dt, PropagatorOptions opts = {});
  ~SplitOperator();
  SplitOperator(SplitOperator&&) noexcept;
  SplitOperator& operator=(SplitOperator&&) noexcept;

  void step(VibronicWavefunction& psi, std::size_t n = 1);
  double energy(const VibronicWavefunction& psi);
  double dt() const;
  bool absorbing() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Scalar-potential propagator for independent single-surface runs.
class SurfacePropagator {
 public:
  SurfacePropagator(std::vector<double> potential, const SpatialGrid& grid, double mass, double dt);
  ~SurfacePropagator();
  SurfacePropagator(SurfacePropagator&&) noexcept;
  void step(std::vector<cd>& chi, std::size_t n = 1);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct Observation {
  std::size_t step = 0;
  double time = 0.0;
  double norm = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
  std::vector<double> weights;
  std::vector<double> x_mean;  // per state, in the representation of rho_el
  std::vector<double> p_mean;
  std::vector<double> branch_energy;
  Eigen::MatrixXcd rho_el;  // adiabatic when surfaces are supplied, else diabatic
};

struct GateReport {
  double requested_dt = 0.0;
  double dt = 0.0;
  int halvings = 0;
  double trial_energy_change = 0.0;
  double max_step_norm_drift = 0.0;
  double norm_drift = 0.0;
  double energy_drift = 0.0;
  bool boundary_warning = false;
  std::size_t boundary_step = 0;
  double boundary_density = 0.0;
  bool dt_gate_passed = true;
  bool norm_gate_passed = true;
  bool energy_gate_passed = true;
  std::vector<std::string> messages;

  bool passed() const { return dt_gate_passed && norm_gate_passed && energy_gate_passed; }
};

struct Snapshot {
  std::size_t step;
  const VibronicWavefunction& psi;  // diabatic
};

struct PropagateOptions {
  double dt = 0.1;
  std::size_t n_steps = 0;  // scaled up if dt is halved so the final time is unchanged
  std::size_t stride = 0;   // observation stride; 0 records only the endpoints
  const bo::AdiabaticSurfaces* surfaces = nullptr;  // needed for branch-resolved observations
  std::function<void(const Snapshot&)> observer;    // called at every stride sample
  PropagatorOptions propagator;
  bool validate_dt = true;
  double dt_gate = 1e-9;
  double energy_gate = 1e-8;
  double norm_step_gate = 1e-12;
  double boundary_fraction = 0.025;
  double boundary_tol = 1e-6;
};

struct PropagationResult {
  VibronicWavefunction final;
  std::vector<Observation> series;
  GateReport gates;
};

PropagationResult propagate(VibronicWavefunction psi, const DiabaticModel& model, const PropagateOptions& opts);

struct BranchDecomposition {
  std::vector<double> weights;
  std::vector<double> branch_norms;
  std::vector<std::vector<cd>> conditional;
  std::vector<double> energies;
  std::vector<char> empty;
};

inline constexpr double kEmptyBranch = 1e-8;

BranchDecomposition decompose(const VibronicWavefunction& psi, const bo::AdiabaticSurfaces& s);

// rho_nm = integral chi_n chi_m^* dx in the representation of psi.
Eigen::MatrixXcd electronic_density(const VibronicWavefunction& psi);
double branch_overlap(const VibronicWavefunction& adiabatic, int n, int m);  // integral |chi_n||chi_m| / norms

struct ReducedEquationReport {
  bool applicable = false;
  std::string reason;
  double max_weight_drift = 0.0;
  double phase_rate_residual = 0.0;  // hartree, resolved modulo 2 pi / snapshot spacing
  double energy_scale = 0.0;
  double conditional_fidelity = 1.0;  // min |<chi_full|chi_single>|
  double phase_fidelity = 1.0;        // min Re <chi_full|chi_single>
};

// snapshots: adiabatic wavefunctions over the interval, increasing time.
ReducedEquationReport check_reduced_equations(const std::vector<VibronicWavefunction>& snapshots,
                                              const bo::AdiabaticSurfaces& s, const std::vector<char>& mask,
                                              double dt_single = 0.1, double support_tol = 1e-6);

struct ChannelSpec {
  std::string name;
  int surface = 0;
  double x_lo = 0.0;
  double x_hi = 0.0;  // half-open [x_lo, x_hi)
};

struct ChannelOutcome {
  std::vector<std::string> names;
  std::vector<double> raw;            // integrated density
  std::vector<double> probabilities;  // normalized over assigned density
  double unassigned = 0.0;
};

ChannelOutcome scattering_outcomes(const VibronicWavefunction& adiabatic, const std::vector<ChannelSpec>& channels,
                                   double leak_tol = 1e-3);

}  // namespace vibro::exact

// Entanglement measures, pure-vs-mixture comparisons on dynamics data,
// interference detection and momentum scans.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vibrolab/exact.hpp"
#include "vibrolab/mqc.hpp"

namespace vibro::diag {

struct EntanglementReport {
  std::vector<double> schmidt_coefficients;  // descending
  double entropy = 0.0;                      // nats
  int rank_eps = 0;                          // eigenvalues above 1e-8
  Eigen::MatrixXd branch_overlaps;           // |<chi_n|chi_m>| of normalized conditionals
};

// From a normalized-or-not electronic reduced density.
EntanglementReport entanglement_from_density(const Eigen::MatrixXcd& rho);
// Diabatic input is transformed to the adiabatic representation first.
EntanglementReport vibronic_entropy(const VibronicWavefunction& psi, const bo::AdiabaticSurfaces& s);

struct DeviationSeries {
  std::vector<double> time;
  std::vector<double> deviation;  // max over frame states of |pop_exact - pop_mixture|
  double max_deviation = 0.0;
  double tolerance = 0.0;  // statistical tolerance of the ensemble, reported alongside
};

// Populations F_l^H rho F_l in the global frame F (columns) compared sample by
// sample. Both series must share their time grid.
DeviationSeries diagonal_deviation_series(const std::vector<exact::Observation>& exact_series,
                                          const std::vector<mqc::EnsembleSample>& mixture_series,
                                          const Eigen::MatrixXcd& frame, double tolerance);

struct OscillationMetrics {
  int extrema = 0;         // interior turning points larger than the noise threshold
  double amplitude = 0.0;  // peak to trough of the smoothed curve
};

std::vector<double> smooth3(const std::vector<double>& y);
OscillationMetrics oscillation_metrics(const std::vector<double>& y, double noise);
double pearson(const std::vector<double>& a, const std::vector<double>& b);

inline constexpr double kDeterministicNoise = 0.005;

struct SchemeCurve {
  std::string scheme;
  std::vector<std::vector<double>> probabilities;  // [point][channel]
  std::vector<double> std_error;                   // focus channel, per point
  std::vector<char> ok;                            // point passed its gates
  std::vector<std::string> notes;
  OscillationMetrics metrics;
  double noise = 0.0;
  double correlation = 0.0;  // against the exact curve; 0 when unavailable

  std::vector<double> focus(int channel) const;
};

struct ScanResult {
  std::string parameter = "k0";
  std::vector<double> values;
  std::vector<std::string> channel_names;
  int focus_channel = 0;
  std::vector<SchemeCurve> curves;

  const SchemeCurve* find(const std::string& scheme) const;
};

// dual_crossing parameters with crossings at +-10 and a slow inter-crossing phase.
ParamMap stueckelberg_params();

struct ScanSettings {
  ParamMap model_params = stueckelberg_params();
  SpatialGrid grid{-64.0, 64.0, 2048};
  double x0 = -28.0;
  double sigma = 0.7;
  double exact_dt = 0.5;
  double travel = 60.0;  // final time = travel * M / k0
  std::size_t fssh_traj = 1000;
  std::size_t mixture_traj = 500;
  std::uint64_t seed = 7;
  double traj_dt = 1.0;
  double merge_dt = -1.0;
  double merge_dx = -1.0;
  bool merge_require_same_surface = false;
  std::vector<exact::ChannelSpec> channels;  // empty: transmitted/reflected per surface
  int focus_channel = -1;                    // <0: upper transmitted
};

// schemes: exact, fssh, hybrid-coherent, hybrid-incoherent, mixture
ScanResult stueckelberg_scan(const std::vector<double>& k_values, const std::vector<std::string>& schemes,
                             const ScanSettings& settings);
// Recomputes metrics, noise thresholds and correlations from the stored curves.
void analyze_scan(ScanResult& scan);

struct WitnessSettings {
  ScanSettings scan;
  double k0 = 20.0;
  double phase = 3.14159265358979323846;
  double window_tol = 1e-4;  // density inside windows defining the coupling-free interval
  std::size_t stride = 10;
};

struct ReinterferenceReport {
  bool applicable = false;
  std::string reason;
  double t2 = 0.0;
  double t3 = 0.0;
  std::vector<double> c_abs_t2;
  std::vector<double> c_abs_t3;
  double amplitude_drift = 0.0;
  double overlap_at_entry = 0.0;
  double p_reference = 0.0;
  double p_shifted = 0.0;
  double delta = 0.0;
};

// Paired exact runs on dual_crossing: reference and with the upper branch
// multiplied by exp(i phase) at t2.
ReinterferenceReport reinterference_witness(const WitnessSettings& settings);

// Single-branch input check used by the witness.
bool single_branch(const VibronicWavefunction& adiabatic, double floor = exact::kEmptyBranch);

std::vector<exact::ChannelSpec> default_scan_channels(const SpatialGrid& grid);

}  // namespace vibro::diag

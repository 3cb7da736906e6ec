// Finite-dimensional subsystem (x) environment algebra: product states,
// Schmidt form, partial traces, synthesized pointer / preferred-state
// evolutions and the mixtures compared against them.
#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vibro::composite {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// amp(a, e) is the amplitude on |a>|e>. Flattened index is a*dim_e + e.
struct CompositeState {
  CMatrix amp;
  std::vector<std::string> labels_a;
  std::vector<std::string> labels_e;

  int dim_a() const { return static_cast<int>(amp.rows()); }
  int dim_e() const { return static_cast<int>(amp.cols()); }
  double norm() const { return amp.norm(); }
  CVector vec() const;
  static CompositeState from_vec(const CVector& v, int dim_a, int dim_e);
};

struct DensityOperator {
  CMatrix mat;

  int dim() const { return static_cast<int>(mat.rows()); }
  cd trace() const { return mat.trace(); }
  double purity() const;
  static DensityOperator pure(const CompositeState& s);
  // Throws if not Hermitian / unit trace / PSD within the given tolerances.
  void validate(double herm_tol = 1e-12, double trace_tol = 1e-12, double psd_tol = 1e-10) const;
};

enum class Keep { subsystem, environment };

CompositeState compose(const CVector& sub, const CVector& env);

struct RebasisTerm {
  cd coeff;
  CVector record;  // unit norm unless undefined
  bool undefined = false;
};

inline constexpr double kZeroBranch = 1e-14;

std::vector<RebasisTerm> rebasis_subsystem(const CompositeState& state, const CMatrix& new_frame);
CompositeState recombine(const std::vector<RebasisTerm>& terms, const CMatrix& frame);

struct SchmidtDecomposition {
  Eigen::VectorXd coefficients;  // descending
  CMatrix sub_basis;             // columns
  CMatrix env_basis;             // columns
  int rank(double eps = 1e-12) const;
  CompositeState reconstruct() const;
};

SchmidtDecomposition schmidt(const CompositeState& state);

DensityOperator partial_trace(const DensityOperator& rho, int dim_a, int dim_e, Keep keep);
double entropy(const DensityOperator& rho);  // nats
double entropy_of_weights(const Eigen::VectorXd& p);

struct PointerEvolution {
  int dim_a = 0;
  int dim_e = 0;
  CMatrix pointer_frame;
  std::vector<CMatrix> env_unitaries;
  CMatrix total;
};

struct PreferredEvolution {
  int dim_a = 0;
  int dim_e = 0;
  std::vector<CMatrix> frames;            // one per environment label O_i
  std::vector<CMatrix> sector_unitaries;  // one per sector n
  CMatrix total;
};

PointerEvolution synthesize_pointer_evolution(const CMatrix& pointer_frame,
                                              const std::vector<CMatrix>& env_unitaries);
PreferredEvolution synthesize_preferred_evolution(const std::vector<CMatrix>& frames,
                                                  const std::vector<CMatrix>& sector_unitaries);

CompositeState evolve(const CompositeState& s, const CMatrix& u, int steps);
DensityOperator evolve(const DensityOperator& rho, const CMatrix& u, int steps);
inline CompositeState evolve(const CompositeState& s, const PointerEvolution& e, int steps) {
  return evolve(s, e.total, steps);
}
inline CompositeState evolve(const CompositeState& s, const PreferredEvolution& e, int steps) {
  return evolve(s, e.total, steps);
}
inline DensityOperator evolve(const DensityOperator& r, const PointerEvolution& e, int steps) {
  return evolve(r, e.total, steps);
}
inline DensityOperator evolve(const DensityOperator& r, const PreferredEvolution& e, int steps) {
  return evolve(r, e.total, steps);
}

// Subsystem frames indexed by environment label. A single frame is broadcast
// to every label (the pointer case).
struct FrameSet {
  std::vector<CMatrix> frames;

  FrameSet() = default;
  explicit FrameSet(CMatrix single) : frames{std::move(single)} {}
  explicit FrameSet(std::vector<CMatrix> per_label) : frames(std::move(per_label)) {}
  const CMatrix& at(int label) const { return frames.size() == 1 ? frames[0] : frames.at(label); }
  // Projector onto sector n: sum_i |P_n:O_i><P_n:O_i| (x) |O_i><O_i|.
  CMatrix sector_projector(int n, int dim_a, int dim_e) const;
};

// A_ni = <P_n:O_i|<O_i|psi>
CMatrix sector_amplitudes(const CompositeState& s, const FrameSet& frames);
Eigen::VectorXd sector_populations(const CompositeState& s, const FrameSet& frames);

enum class MixtureMode { pointer, preferred, fully_diagonal };

DensityOperator build_mixture(const CompositeState& s, const FrameSet& frames, MixtureMode mode);
inline DensityOperator build_mixture(const CompositeState& s, const CMatrix& frame, MixtureMode mode) {
  return build_mixture(s, FrameSet(frame), mode);
}

struct DiagonalReport {
  double max_abs_deviation = 0.0;     // over sector blocks, environment resolved
  double max_traced_deviation = 0.0;  // over sector populations
  std::vector<double> per_step;       // resolved deviation at steps 0..horizon
  std::vector<double> per_step_traced;
};

DiagonalReport compare_diagonal_dynamics(const CompositeState& pure0, const FrameSet& frames,
                                         const CMatrix& evolution, int horizon,
                                         MixtureMode mode = MixtureMode::pointer);
inline DiagonalReport compare_diagonal_dynamics(const CompositeState& pure0, const CMatrix& frame,
                                                const CMatrix& evolution, int horizon) {
  return compare_diagonal_dynamics(pure0, FrameSet(frame), evolution, horizon, MixtureMode::pointer);
}

struct NonPointerExpansion {
  std::vector<RebasisTerm> initial;                // D_n and E^(n) in the initial frame
  std::vector<std::vector<cd>> d;                  // d[l][n]
  std::vector<std::vector<CVector>> records;       // |E^N_{l,n}(t)>
  std::vector<std::vector<bool>> undefined;
  double recombination_error = 0.0;
};

NonPointerExpansion nonpointer_expansion(const CompositeState& state, const CMatrix& initial_frame,
                                         const CMatrix& evolution, int steps, const CMatrix& frame_t);

// Seeded Haar-like unitary from the QR of a Gaussian matrix.
CMatrix random_unitary(int dim, std::uint64_t seed);
CMatrix rotation(double theta);  // 2x2 real rotation, columns are the rotated basis
double unitarity_error(const CMatrix& u);

}  // namespace vibro::composite

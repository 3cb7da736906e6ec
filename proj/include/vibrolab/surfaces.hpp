// Born-Oppenheimer surfaces on a grid: energies, gauge-fixed frames and
// derivative couplings.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "vibrolab/grid.hpp"
#include "vibrolab/kernels.hpp"
#include "vibrolab/models.hpp"
#include "vibrolab/wavefunction.hpp"

namespace vibro::bo {

inline constexpr double kDegenerateGap = 1e-12;

struct AdiabaticSurfaces {
  SpatialGrid grid;
  int n_states = 2;
  double mass = 1.0;
  std::vector<double> energies;  // [n * N + i], ascending in n
  std::vector<double> frames;    // [i * n * n + r * n + c], column c is state c
  std::vector<double> d1;        // [(n * ns + m) * N + i]
  std::vector<double> d2;
  bool has_couplings = false;
  std::vector<std::size_t> degenerate_points;

  std::size_t n_points() const { return grid.n_points; }
  double energy(int n, std::size_t i) const { return energies[static_cast<std::size_t>(n) * grid.n_points + i]; }
  double frame(std::size_t i, int r, int c) const {
    return frames[i * static_cast<std::size_t>(n_states * n_states) + static_cast<std::size_t>(r * n_states + c)];
  }
  Eigen::MatrixXd frame_matrix(std::size_t i) const;
  double coupling1(int n, int m, std::size_t i) const {
    return d1[(static_cast<std::size_t>(n * n_states + m)) * grid.n_points + i];
  }
  double coupling2(int n, int m, std::size_t i) const {
    return d2[(static_cast<std::size_t>(n * n_states + m)) * grid.n_points + i];
  }
  double max_abs_d1() const;
};

AdiabaticSurfaces diagonalize(const DiabaticModel& model, const SpatialGrid& grid,
                              kernels::Exec exec = kernels::Exec::parallel);
AdiabaticSurfaces couplings(AdiabaticSurfaces s);
inline AdiabaticSurfaces build(const DiabaticModel& model, const SpatialGrid& grid) {
  return couplings(diagonalize(model, grid));
}

// <phi_n|V'|phi_m> / (e_m - e_n) at every grid point.
std::vector<double> hellmann_feynman_d1(const DiabaticModel& model, const AdiabaticSurfaces& s, int n, int m);

VibronicWavefunction to_adiabatic(const VibronicWavefunction& psi, const AdiabaticSurfaces& s,
                                  kernels::Exec exec = kernels::Exec::parallel);
VibronicWavefunction to_diabatic(const VibronicWavefunction& psi, const AdiabaticSurfaces& s,
                                 kernels::Exec exec = kernels::Exec::parallel);

// 1e-3 max|d1|, floored so that an uncoupled model is coupling-free everywhere
inline constexpr double kMaskFloor = 1e-8;
double default_mask_threshold(const AdiabaticSurfaces& s);
// true where every off-diagonal |d1| <= threshold and |d2| <= threshold * max(threshold, max|d1|)
std::vector<char> coupling_free_mask(const AdiabaticSurfaces& s, double threshold);

struct Window {
  std::size_t i_lo = 0;
  std::size_t i_hi = 0;  // inclusive
  double x_lo = 0.0;
  double x_hi = 0.0;
  bool contains(double x) const { return x >= x_lo && x <= x_hi; }
};

// Connected false regions of the mask, widened by margin on each side.
// Windows that overlap after widening are fused.
std::vector<Window> windows_from_mask(const std::vector<char>& mask, const SpatialGrid& grid, double margin);

// x, e_0..e_{n-1}, d1_01, d2_01
void write_csv(const AdiabaticSurfaces& s, std::ostream& os);

}  // namespace vibro::bo

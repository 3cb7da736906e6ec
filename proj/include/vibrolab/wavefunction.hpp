#pragma once

#include <complex>
#include <vector>

#include "vibrolab/grid.hpp"

namespace vibro {

using cd = std::complex<double>;

enum class Representation { diabatic, adiabatic };

// psi[n * n_points + i]; normalized so that sum |psi|^2 dx = 1.
struct VibronicWavefunction {
  SpatialGrid grid;
  Representation rep = Representation::diabatic;
  int n_states = 2;
  std::vector<cd> psi;
  double time = 0.0;

  static VibronicWavefunction zeros(const SpatialGrid& g, int n_states, Representation rep);

  std::size_t n_points() const { return grid.n_points; }
  cd* state(int n) { return psi.data() + static_cast<std::size_t>(n) * grid.n_points; }
  const cd* state(int n) const { return psi.data() + static_cast<std::size_t>(n) * grid.n_points; }
  cd& at(int n, std::size_t i) { return psi[static_cast<std::size_t>(n) * grid.n_points + i]; }
  const cd& at(int n, std::size_t i) const { return psi[static_cast<std::size_t>(n) * grid.n_points + i]; }

  double weight(int n) const;  // integral of |psi_n|^2
  double norm() const;         // sqrt of the total weight
  std::vector<double> weights() const;
};

}  // namespace vibro

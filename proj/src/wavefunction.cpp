#include "vibrolab/wavefunction.hpp"

#include <cmath>

namespace vibro {

VibronicWavefunction VibronicWavefunction::zeros(const SpatialGrid& g, int n_states, Representation rep) {
  VibronicWavefunction w;
  w.grid = g;
  w.rep = rep;
  w.n_states = n_states;
  w.psi.assign(static_cast<std::size_t>(n_states) * g.n_points, cd(0.0, 0.0));
  return w;
}

double VibronicWavefunction::weight(int n) const {
  const cd* p = state(n);
  double s = 0.0;
  for (std::size_t i = 0; i < grid.n_points; ++i) s += std::norm(p[i]);
  return s * grid.dx();
}

double VibronicWavefunction::norm() const {
  double s = 0.0;
  for (const auto& v : psi) s += std::norm(v);
  return std::sqrt(s * grid.dx());
}

std::vector<double> VibronicWavefunction::weights() const {
  std::vector<double> w(static_cast<std::size_t>(n_states));
  for (int n = 0; n < n_states; ++n) w[static_cast<std::size_t>(n)] = weight(n);
  return w;
}

}  // namespace vibro

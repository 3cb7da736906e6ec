#include "vibrolab/grid.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vibro {

SpatialGrid SpatialGrid::make(double x_min, double x_max, std::size_t n_points) {
  SpatialGrid g{x_min, x_max, n_points};
  g.validate();
  return g;
}

void SpatialGrid::validate() const {
  if (!(x_max > x_min)) throw std::invalid_argument("grid: x_max must exceed x_min");
  if (n_points < 64) throw std::invalid_argument("grid: n_points must be >= 64, got " + std::to_string(n_points));
  if ((n_points & (n_points - 1)) != 0)
    throw std::invalid_argument("grid: n_points must be a power of two, got " + std::to_string(n_points));
}

double SpatialGrid::k(std::size_t j) const {
  const double dk = 2.0 * std::numbers::pi / (x_max - x_min);
  const auto n = static_cast<long long>(n_points);
  auto jj = static_cast<long long>(j);
  // FFT ordering; the Nyquist point is taken positive so k dx lies in (-pi, pi]
  if (jj > n / 2) jj -= n;
  return dk * static_cast<double>(jj);
}

std::vector<double> SpatialGrid::positions() const {
  std::vector<double> out(n_points);
  for (std::size_t i = 0; i < n_points; ++i) out[i] = x(i);
  return out;
}

std::vector<double> SpatialGrid::momenta() const {
  std::vector<double> out(n_points);
  for (std::size_t j = 0; j < n_points; ++j) out[j] = k(j);
  return out;
}

std::size_t SpatialGrid::index_of(double xv) const {
  const double f = std::round((xv - x_min) / dx());
  if (f <= 0.0) return 0;
  if (f >= static_cast<double>(n_points - 1)) return n_points - 1;
  return static_cast<std::size_t>(f);
}

}  // namespace vibro

#pragma once

#include <cstddef>
#include <vector>

namespace vibro {

// Uniform periodic grid on [x_min, x_max). Momenta follow FFT ordering.
struct SpatialGrid {
  double x_min = -40.0;
  double x_max = 40.0;
  std::size_t n_points = 1024;

  static SpatialGrid make(double x_min, double x_max, std::size_t n_points);
  void validate() const;

  double dx() const { return (x_max - x_min) / static_cast<double>(n_points); }
  double x(std::size_t i) const { return x_min + static_cast<double>(i) * dx(); }
  double k(std::size_t j) const;
  std::vector<double> positions() const;
  std::vector<double> momenta() const;
  std::size_t index_of(double x) const;  // nearest point, clamped

  bool operator==(const SpatialGrid& o) const {
    return x_min == o.x_min && x_max == o.x_max && n_points == o.n_points;
  }
};

}  // namespace vibro

#include "vibrolab/kernels.hpp"

#include <cmath>
#include <vector>

namespace vibro::kernels {

namespace {

inline void point_matrix(cd* psi, int n, std::size_t np, const cd* m, std::size_t i, cd* tmp) {
  for (int r = 0; r < n; ++r) {
    cd acc = 0.0;
    for (int c = 0; c < n; ++c) acc += m[r * n + c] * psi[static_cast<std::size_t>(c) * np + i];
    tmp[r] = acc;
  }
  for (int r = 0; r < n; ++r) psi[static_cast<std::size_t>(r) * np + i] = tmp[r];
}

inline void point_frame(cd* psi, int n, std::size_t np, const double* f, bool transpose, std::size_t i, cd* tmp) {
  for (int r = 0; r < n; ++r) {
    cd acc = 0.0;
    for (int c = 0; c < n; ++c) {
      const double w = transpose ? f[c * n + r] : f[r * n + c];
      acc += w * psi[static_cast<std::size_t>(c) * np + i];
    }
    tmp[r] = acc;
  }
  for (int r = 0; r < n; ++r) psi[static_cast<std::size_t>(r) * np + i] = tmp[r];
}

}  // namespace

void apply_point_matrices(cd* psi, int n_states, std::size_t n_points, const cd* mats, Exec exec) {
  const std::size_t nn = static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_states);
  const auto np = static_cast<long long>(n_points);
  if (exec == Exec::serial) {
    std::vector<cd> tmp(static_cast<std::size_t>(n_states));
    for (long long i = 0; i < np; ++i)
      point_matrix(psi, n_states, n_points, mats + nn * static_cast<std::size_t>(i), static_cast<std::size_t>(i),
                   tmp.data());
    return;
  }
#pragma omp parallel
  {
    std::vector<cd> tmp(static_cast<std::size_t>(n_states));
#pragma omp for schedule(static)
    for (long long i = 0; i < np; ++i)
      point_matrix(psi, n_states, n_points, mats + nn * static_cast<std::size_t>(i), static_cast<std::size_t>(i),
                   tmp.data());
  }
}

void apply_point_sym2(cd* psi, std::size_t n_points, const cd* u, Exec exec) {
  cd* p0 = psi;
  cd* p1 = psi + n_points;
  const auto np = static_cast<long long>(n_points);
  if (exec == Exec::serial) {
    for (long long i = 0; i < np; ++i) {
      const cd* m = u + 3 * i;
      const cd a = p0[i], b = p1[i];
      p0[i] = m[0] * a + m[1] * b;
      p1[i] = m[1] * a + m[2] * b;
    }
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < np; ++i) {
    const cd* m = u + 3 * i;
    const cd a = p0[i], b = p1[i];
    p0[i] = m[0] * a + m[1] * b;
    p1[i] = m[1] * a + m[2] * b;
  }
}

void apply_real_frames(cd* psi, int n_states, std::size_t n_points, const double* frames, bool transpose,
                       Exec exec) {
  const std::size_t nn = static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_states);
  const auto np = static_cast<long long>(n_points);
  if (exec == Exec::serial) {
    std::vector<cd> tmp(static_cast<std::size_t>(n_states));
    for (long long i = 0; i < np; ++i)
      point_frame(psi, n_states, n_points, frames + nn * static_cast<std::size_t>(i), transpose,
                  static_cast<std::size_t>(i), tmp.data());
    return;
  }
#pragma omp parallel
  {
    std::vector<cd> tmp(static_cast<std::size_t>(n_states));
#pragma omp for schedule(static)
    for (long long i = 0; i < np; ++i)
      point_frame(psi, n_states, n_points, frames + nn * static_cast<std::size_t>(i), transpose,
                  static_cast<std::size_t>(i), tmp.data());
  }
}

void multiply_rows(cd* psi, int n_states, std::size_t n_points, const cd* phase, Exec exec) {
  const auto total = static_cast<long long>(n_points) * n_states;
  const auto np = static_cast<long long>(n_points);
  if (exec == Exec::serial) {
    for (long long k = 0; k < total; ++k) psi[k] *= phase[k % np];
    return;
  }
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < total; ++k) psi[k] *= phase[k % np];
}

void sym2_propagator(double a, double b, double c, double dt, cd out[3]) {
  const double m = 0.5 * (a + b);
  const double d = 0.5 * (a - b);
  const double r = std::hypot(d, c);
  const cd g = std::polar(1.0, -m * dt);
  const double cr = std::cos(r * dt);
  // sin(r dt)/r, finite as r -> 0
  const double sr = r > 1e-300 ? std::sin(r * dt) / r : dt;
  const cd mi(0.0, -1.0);
  out[0] = g * (cr + mi * sr * d);
  out[1] = g * (mi * sr * c);
  out[2] = g * (cr - mi * sr * d);
}

void sym2_eigen(double a, double b, double c, double& e_lo, double& e_hi, double vec[4]) {
  const double m = 0.5 * (a + b);
  const double d = 0.5 * (a - b);
  const double r = std::hypot(d, c);
  e_lo = m - r;
  e_hi = m + r;
  const double th = 0.5 * std::atan2(c, d);
  const double ct = std::cos(th), st = std::sin(th);
  // row-major, column 0 = lower (-s, c), column 1 = upper (c, s)
  vec[0] = -st;
  vec[1] = ct;
  vec[2] = ct;
  vec[3] = st;
}

}  // namespace vibro::kernels

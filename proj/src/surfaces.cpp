#include "vibrolab/surfaces.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace vibro::bo {

namespace {

void diag_point(const DiabaticModel& model, double x, int n, double* e, double* f) {
  if (model.has_sym2()) {
    Sym2 v, dv;
    model.eval2(x, v, dv);
    kernels::sym2_eigen(v.v11, v.v22, v.v12, e[0], e[1], f);
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.potential(x));
  for (int k = 0; k < n; ++k) e[k] = es.eigenvalues()(k);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) f[r * n + c] = es.eigenvectors()(r, c);
}

// 4th-order first and second derivative weights; one-sided near the ends.
void stencil1(std::size_t i, std::size_t np, double h, std::size_t idx[5], double w[5]) {
  if (i >= 2 && i + 2 < np) {
    const double c[5] = {1.0, -8.0, 0.0, 8.0, -1.0};
    for (int k = 0; k < 5; ++k) {
      idx[k] = i - 2 + static_cast<std::size_t>(k);
      w[k] = c[k] / (12.0 * h);
    }
    return;
  }
  const double c0[5] = {-25.0, 48.0, -36.0, 16.0, -3.0};
  const double c1[5] = {-3.0, -10.0, 18.0, -6.0, 1.0};
  const bool left = i < 2;
  const double* c = (left ? i : np - 1 - i) == 0 ? c0 : c1;
  for (int k = 0; k < 5; ++k) {
    if (left) {
      idx[k] = static_cast<std::size_t>(k);
      w[k] = c[k] / (12.0 * h);
    } else {
      idx[k] = np - 1 - static_cast<std::size_t>(k);
      w[k] = -c[k] / (12.0 * h);
    }
  }
}

void stencil2(std::size_t i, std::size_t np, double h, std::size_t idx[6], double w[6], int& count) {
  if (i >= 2 && i + 2 < np) {
    const double c[5] = {-1.0, 16.0, -30.0, 16.0, -1.0};
    count = 5;
    for (int k = 0; k < 5; ++k) {
      idx[k] = i - 2 + static_cast<std::size_t>(k);
      w[k] = c[k] / (12.0 * h * h);
    }
    return;
  }
  const double c0[6] = {45.0, -154.0, 214.0, -156.0, 61.0, -10.0};
  const double c1[6] = {10.0, -15.0, -4.0, 14.0, -6.0, 1.0};
  const bool left = i < 2;
  const double* c = (left ? i : np - 1 - i) == 0 ? c0 : c1;
  count = 6;
  for (int k = 0; k < 6; ++k) {
    idx[k] = left ? static_cast<std::size_t>(k) : np - 1 - static_cast<std::size_t>(k);
    w[k] = c[k] / (12.0 * h * h);
  }
}

}  // namespace

Eigen::MatrixXd AdiabaticSurfaces::frame_matrix(std::size_t i) const {
  Eigen::MatrixXd m(n_states, n_states);
  for (int r = 0; r < n_states; ++r)
    for (int c = 0; c < n_states; ++c) m(r, c) = frame(i, r, c);
  return m;
}

double AdiabaticSurfaces::max_abs_d1() const {
  double m = 0.0;
  for (double v : d1) m = std::max(m, std::abs(v));
  return m;
}

AdiabaticSurfaces diagonalize(const DiabaticModel& model, const SpatialGrid& grid, kernels::Exec exec) {
  grid.validate();
  const int n = model.n_states();
  const std::size_t np = grid.n_points;
  const std::size_t nn = static_cast<std::size_t>(n * n);
  AdiabaticSurfaces s;
  s.grid = grid;
  s.n_states = n;
  s.mass = model.mass();
  s.energies.assign(static_cast<std::size_t>(n) * np, 0.0);
  s.frames.assign(nn * np, 0.0);
  std::vector<double> ebuf(static_cast<std::size_t>(n) * np);

  const auto npl = static_cast<long long>(np);
  auto body = [&](long long i) {
    const auto ui = static_cast<std::size_t>(i);
    diag_point(model, grid.x(ui), n, ebuf.data() + ui * static_cast<std::size_t>(n), s.frames.data() + ui * nn);
  };
  if (exec == kernels::Exec::serial) {
    for (long long i = 0; i < npl; ++i) body(i);
  } else {
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < npl; ++i) body(i);
  }
  for (std::size_t i = 0; i < np; ++i)
    for (int k = 0; k < n; ++k) s.energies[static_cast<std::size_t>(k) * np + i] = ebuf[i * static_cast<std::size_t>(n) + static_cast<std::size_t>(k)];

  // gauge: first point largest component positive, then sign continuity
  for (int c = 0; c < n; ++c) {
    double* f0 = s.frames.data();
    int imax = 0;
    for (int r = 1; r < n; ++r)
      if (std::abs(f0[r * n + c]) > std::abs(f0[imax * n + c])) imax = r;
    if (f0[imax * n + c] < 0.0)
      for (int r = 0; r < n; ++r) f0[r * n + c] = -f0[r * n + c];
  }
  for (std::size_t i = 1; i < np; ++i) {
    const double* prev = s.frames.data() + (i - 1) * nn;
    double* cur = s.frames.data() + i * nn;
    for (int c = 0; c < n; ++c) {
      double dot = 0.0;
      for (int r = 0; r < n; ++r) dot += prev[r * n + c] * cur[r * n + c];
      if (dot < 0.0)
        for (int r = 0; r < n; ++r) cur[r * n + c] = -cur[r * n + c];
    }
  }
  for (std::size_t i = 0; i < np; ++i)
    for (int k = 0; k + 1 < n; ++k)
      if (s.energy(k + 1, i) - s.energy(k, i) < kDegenerateGap) {
        s.degenerate_points.push_back(i);
        break;
      }
  return s;
}

AdiabaticSurfaces couplings(AdiabaticSurfaces s) {
  const int n = s.n_states;
  const std::size_t np = s.grid.n_points;
  if (np < 6) throw std::invalid_argument("couplings: grid too small");
  const std::size_t nn = static_cast<std::size_t>(n * n);
  const double h = s.grid.dx();
  s.d1.assign(nn * np, 0.0);
  s.d2.assign(nn * np, 0.0);
  const auto npl = static_cast<long long>(np);
#pragma omp parallel for schedule(static)
  for (long long ii = 0; ii < npl; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    std::size_t idx1[5], idx2[6];
    double w1[5], w2[6];
    int c2 = 0;
    stencil1(i, np, h, idx1, w1);
    stencil2(i, np, h, idx2, w2, c2);
    const double* f = s.frames.data() + i * nn;
    for (int m = 0; m < n; ++m) {
      // derivative of column m
      std::vector<double> g1(static_cast<std::size_t>(n), 0.0), g2(static_cast<std::size_t>(n), 0.0);
      for (int k = 0; k < 5; ++k) {
        const double* fk = s.frames.data() + idx1[k] * nn;
        for (int r = 0; r < n; ++r) g1[static_cast<std::size_t>(r)] += w1[k] * fk[r * n + m];
      }
      for (int k = 0; k < c2; ++k) {
        const double* fk = s.frames.data() + idx2[k] * nn;
        for (int r = 0; r < n; ++r) g2[static_cast<std::size_t>(r)] += w2[k] * fk[r * n + m];
      }
      for (int nrow = 0; nrow < n; ++nrow) {
        double a1 = 0.0, a2 = 0.0;
        for (int r = 0; r < n; ++r) {
          a1 += f[r * n + nrow] * g1[static_cast<std::size_t>(r)];
          a2 += f[r * n + nrow] * g2[static_cast<std::size_t>(r)];
        }
        s.d1[static_cast<std::size_t>(nrow * n + m) * np + i] = a1;
        s.d2[static_cast<std::size_t>(nrow * n + m) * np + i] = a2;
      }
    }
  }
  s.has_couplings = true;
  return s;
}

std::vector<double> hellmann_feynman_d1(const DiabaticModel& model, const AdiabaticSurfaces& s, int n, int m) {
  std::vector<double> out(s.grid.n_points, 0.0);
  if (n == m) return out;
  for (std::size_t i = 0; i < s.grid.n_points; ++i) {
    const Eigen::MatrixXd f = s.frame_matrix(i);
    const Eigen::MatrixXd g = model.gradient(s.grid.x(i));
    const double num = f.col(n).dot(g * f.col(m));
    out[i] = num / (s.energy(m, i) - s.energy(n, i));
  }
  return out;
}

VibronicWavefunction to_adiabatic(const VibronicWavefunction& psi, const AdiabaticSurfaces& s, kernels::Exec exec) {
  if (!(psi.grid == s.grid) || psi.n_states != s.n_states)
    throw std::invalid_argument("to_adiabatic: grid or state count mismatch");
  if (psi.rep != Representation::diabatic) throw std::invalid_argument("to_adiabatic: input is not diabatic");
  VibronicWavefunction out = psi;
  kernels::apply_real_frames(out.psi.data(), s.n_states, s.grid.n_points, s.frames.data(), true, exec);
  out.rep = Representation::adiabatic;
  return out;
}

VibronicWavefunction to_diabatic(const VibronicWavefunction& psi, const AdiabaticSurfaces& s, kernels::Exec exec) {
  if (!(psi.grid == s.grid) || psi.n_states != s.n_states)
    throw std::invalid_argument("to_diabatic: grid or state count mismatch");
  if (psi.rep != Representation::adiabatic) throw std::invalid_argument("to_diabatic: input is not adiabatic");
  VibronicWavefunction out = psi;
  kernels::apply_real_frames(out.psi.data(), s.n_states, s.grid.n_points, s.frames.data(), false, exec);
  out.rep = Representation::diabatic;
  return out;
}

double default_mask_threshold(const AdiabaticSurfaces& s) { return std::max(1e-3 * s.max_abs_d1(), kMaskFloor); }

std::vector<char> coupling_free_mask(const AdiabaticSurfaces& s, double threshold) {
  if (!s.has_couplings) throw std::invalid_argument("coupling_free_mask: couplings not computed");
  const double d2_bound = threshold * std::max(threshold, s.max_abs_d1());
  std::vector<char> mask(s.grid.n_points, 1);
  for (std::size_t i = 0; i < s.grid.n_points; ++i)
    for (int n = 0; n < s.n_states && mask[i]; ++n)
      for (int m = 0; m < s.n_states; ++m) {
        if (n == m) continue;
        if (std::abs(s.coupling1(n, m, i)) > threshold || std::abs(s.coupling2(n, m, i)) > d2_bound) {
          mask[i] = 0;
          break;
        }
      }
  return mask;
}

std::vector<Window> windows_from_mask(const std::vector<char>& mask, const SpatialGrid& grid, double margin) {
  std::vector<Window> raw;
  std::size_t i = 0;
  while (i < mask.size()) {
    if (mask[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < mask.size() && !mask[j + 1]) ++j;
    raw.push_back({i, j, grid.x(i), grid.x(j)});
    i = j + 1;
  }
  std::vector<Window> out;
  for (auto w : raw) {
    w.x_lo = std::max(grid.x_min, w.x_lo - margin);
    w.x_hi = std::min(grid.x(grid.n_points - 1), w.x_hi + margin);
    w.i_lo = grid.index_of(w.x_lo);
    w.i_hi = grid.index_of(w.x_hi);
    if (!out.empty() && w.x_lo <= out.back().x_hi) {
      out.back().x_hi = std::max(out.back().x_hi, w.x_hi);
      out.back().i_hi = std::max(out.back().i_hi, w.i_hi);
    } else {
      out.push_back(w);
    }
  }
  return out;
}

void write_csv(const AdiabaticSurfaces& s, std::ostream& os) {
  const auto old = os.precision(17);
  os << "x";
  for (int n = 0; n < s.n_states; ++n) os << ",e" << n;
  os << ",d1_01,d2_01\n";
  for (std::size_t i = 0; i < s.grid.n_points; ++i) {
    os << s.grid.x(i);
    for (int n = 0; n < s.n_states; ++n) os << ',' << s.energy(n, i);
    const bool two = s.n_states >= 2 && s.has_couplings;
    os << ',' << (two ? s.coupling1(0, 1, i) : 0.0) << ',' << (two ? s.coupling2(0, 1, i) : 0.0) << '\n';
  }
  os.precision(old);
}

}  // namespace vibro::bo

#include "vibrolab/exact.hpp"

#include "vibrolab/composite.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace vibro::exact {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place batched transform over `rows` contiguous rows of length n.
class FftBatch {
 public:
  FftBatch(int rows, std::size_t n) : rows_(rows), n_(n) {
    const std::lock_guard<std::mutex> lock(planner_mutex());
    buf_ = fftw_alloc_complex(static_cast<std::size_t>(rows) * n);
    if (buf_ == nullptr) throw std::bad_alloc();
    int dims[1] = {static_cast<int>(n)};
    fwd_ = fftw_plan_many_dft(1, dims, rows, buf_, nullptr, 1, static_cast<int>(n), buf_, nullptr, 1,
                              static_cast<int>(n), FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_many_dft(1, dims, rows, buf_, nullptr, 1, static_cast<int>(n), buf_, nullptr, 1,
                              static_cast<int>(n), FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftBatch() {
    const std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  FftBatch(const FftBatch&) = delete;
  FftBatch& operator=(const FftBatch&) = delete;

  cd* data() { return reinterpret_cast<cd*>(buf_); }
  std::size_t size() const { return static_cast<std::size_t>(rows_) * n_; }
  void forward() { fftw_execute(fwd_); }
  void backward() { fftw_execute(bwd_); }

 private:
  int rows_;
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan bwd_ = nullptr;
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

VibronicWavefunction gaussian_packet(const SpatialGrid& grid, int n_states, const PacketSpec& spec,
                                     Representation rep) {
  grid.validate();
  if (spec.state < 0 || spec.state >= n_states) throw std::invalid_argument("gaussian_packet: state out of range");
  if (!(spec.sigma > 2.0 * grid.dx()))
    throw std::invalid_argument("gaussian_packet: sigma " + num(spec.sigma) + " must exceed 2 dx = " +
                                num(2.0 * grid.dx()));
  if (spec.x0 - 5.0 * spec.sigma < grid.x_min || spec.x0 + 5.0 * spec.sigma > grid.x_max)
    throw std::invalid_argument("gaussian_packet: packet at x0=" + num(spec.x0) + " with sigma=" + num(spec.sigma) +
                                " is within 5 sigma of the grid boundary");
  VibronicWavefunction w = VibronicWavefunction::zeros(grid, n_states, rep);
  cd* p = w.state(spec.state);
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double y = grid.x(i) - spec.x0;
    p[i] = std::exp(cd(-y * y / (4.0 * spec.sigma * spec.sigma), spec.k0 * grid.x(i)));
  }
  const double nrm = w.norm();
  for (std::size_t i = 0; i < grid.n_points; ++i) p[i] /= nrm;
  if (!spec.amplitudes.empty()) {
    if (static_cast<int>(spec.amplitudes.size()) != n_states)
      throw std::invalid_argument("gaussian_packet: amplitude count must equal the state count");
    double a2 = 0.0;
    for (const cd& a : spec.amplitudes) a2 += std::norm(a);
    if (std::abs(a2 - 1.0) > 1e-10) throw std::invalid_argument("gaussian_packet: amplitudes must be unit norm");
    const std::vector<cd> shape(p, p + grid.n_points);
    for (int n = 0; n < n_states; ++n) {
      cd* q = w.state(n);
      for (std::size_t i = 0; i < grid.n_points; ++i) q[i] = spec.amplitudes[static_cast<std::size_t>(n)] * shape[i];
    }
  }
  return w;
}

Moments moments(const cd* chi, const SpatialGrid& grid, double mass) {
  Moments m;
  const std::size_t n = grid.n_points;
  const double dx = grid.dx();
  double w = 0.0, sx = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = std::norm(chi[i]);
    const double x = grid.x(i);
    w += d;
    sx += d * x;
    sxx += d * x * x;
  }
  m.weight = w * dx;
  if (m.weight <= 0.0) return m;
  m.x_mean = sx / w;
  m.x_var = sxx / w - m.x_mean * m.x_mean;
  FftBatch fft(1, n);
  std::copy(chi, chi + n, fft.data());
  fft.forward();
  double wk = 0.0, sk = 0.0, skk = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = std::norm(fft.data()[j]);
    const double k = grid.k(j);
    wk += d;
    sk += d * k;
    skk += d * k * k;
  }
  m.p_mean = sk / wk;
  m.kinetic = skk / wk / (2.0 * mass);
  return m;
}

// ---------------------------------------------------------------------------

struct SplitOperator::Impl {
  SpatialGrid grid;
  int n = 2;
  double mass = 1.0;
  double dt = 0.1;
  PropagatorOptions opts;
  bool sym2 = true;
  std::vector<double> vpack;      // sym2: (v11, v22, v12); general: n*n row-major
  std::vector<cd> upot;           // potential propagator per point
  std::vector<cd> kin_half;       // exp(-i k^2 dt / 4M) / N folded into one backward pass
  std::vector<double> kin_energy;  // k^2/2M
  std::vector<double> absorber;
  FftBatch fft;

  Impl(const DiabaticModel& model, const SpatialGrid& g, double step, PropagatorOptions o)
      : grid(g), n(model.n_states()), mass(model.mass()), dt(step), opts(o), sym2(model.has_sym2()),
        fft(model.n_states(), g.n_points) {
    const std::size_t np = g.n_points;
    if (sym2) {
      vpack.resize(3 * np);
      upot.resize(3 * np);
      for (std::size_t i = 0; i < np; ++i) {
        Sym2 v, dv;
        model.eval2(g.x(i), v, dv);
        vpack[3 * i] = v.v11;
        vpack[3 * i + 1] = v.v22;
        vpack[3 * i + 2] = v.v12;
        kernels::sym2_propagator(v.v11, v.v22, v.v12, dt, &upot[3 * i]);
      }
    } else {
      const std::size_t nn = static_cast<std::size_t>(n * n);
      vpack.resize(nn * np);
      upot.resize(nn * np);
      for (std::size_t i = 0; i < np; ++i) {
        const Eigen::MatrixXd v = model.potential(g.x(i));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
        const Eigen::MatrixXcd ph =
            (es.eigenvalues().cast<cd>() * cd(0.0, -dt)).array().exp().matrix().asDiagonal();
        const Eigen::MatrixXcd u = es.eigenvectors().cast<cd>() * ph * es.eigenvectors().transpose().cast<cd>();
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c) {
            vpack[i * nn + static_cast<std::size_t>(r * n + c)] = v(r, c);
            upot[i * nn + static_cast<std::size_t>(r * n + c)] = u(r, c);
          }
      }
    }
    kin_half.resize(np);
    kin_energy.resize(np);
    for (std::size_t j = 0; j < np; ++j) {
      const double k = g.k(j);
      kin_energy[j] = k * k / (2.0 * mass);
      kin_half[j] = std::polar(1.0 / static_cast<double>(np), -kin_energy[j] * 0.5 * dt);
    }
    if (opts.absorb_width > 0.0) {
      absorber.assign(np, 1.0);
      const double L = opts.absorb_width;
      for (std::size_t i = 0; i < np; ++i) {
        const double x = g.x(i);
        const double d = std::min(x - g.x_min, g.x_max - x);
        if (d < L) absorber[i] = std::pow(std::cos(0.5 * std::numbers::pi * (L - d) / L), 0.125);
      }
    }
  }

  void kinetic_half() {
    fft.forward();
    kernels::multiply_rows(fft.data(), n, grid.n_points, kin_half.data(), opts.exec);
    fft.backward();
  }

  void potential() {
    if (sym2) kernels::apply_point_sym2(fft.data(), grid.n_points, upot.data(), opts.exec);
    else kernels::apply_point_matrices(fft.data(), n, grid.n_points, upot.data(), opts.exec);
  }

  void absorb() {
    if (absorber.empty()) return;
    for (int s = 0; s < n; ++s) {
      cd* p = fft.data() + static_cast<std::size_t>(s) * grid.n_points;
      for (std::size_t i = 0; i < grid.n_points; ++i) p[i] *= absorber[i];
    }
  }

  double energy_of(const VibronicWavefunction& psi) {
    const std::size_t np = grid.n_points;
    double vsum = 0.0, norm2 = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      if (sym2) {
        const cd a = psi.at(0, i), b = psi.at(1, i);
        vsum += vpack[3 * i] * std::norm(a) + vpack[3 * i + 1] * std::norm(b) +
                2.0 * vpack[3 * i + 2] * (std::conj(a) * b).real();
      } else {
        const std::size_t nn = static_cast<std::size_t>(n * n);
        for (int r = 0; r < n; ++r)
          for (int c = 0; c < n; ++c)
            vsum += (std::conj(psi.at(r, i)) * vpack[i * nn + static_cast<std::size_t>(r * n + c)] * psi.at(c, i)).real();
      }
      for (int s = 0; s < n; ++s) norm2 += std::norm(psi.at(s, i));
    }
    std::copy(psi.psi.begin(), psi.psi.end(), fft.data());
    fft.forward();
    double tsum = 0.0, ksum = 0.0;
    for (int s = 0; s < n; ++s) {
      const cd* p = fft.data() + static_cast<std::size_t>(s) * np;
      for (std::size_t j = 0; j < np; ++j) {
        tsum += kin_energy[j] * std::norm(p[j]);
        ksum += std::norm(p[j]);
      }
    }
    return tsum / ksum + vsum / norm2;
  }
};

SplitOperator::SplitOperator(const DiabaticModel& model, const SpatialGrid& grid, double dt, PropagatorOptions opts) {
  grid.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("propagator: dt must be positive");
  impl_ = std::make_unique<Impl>(model, grid, dt, opts);
}
SplitOperator::~SplitOperator() = default;
SplitOperator::SplitOperator(SplitOperator&&) noexcept = default;
SplitOperator& SplitOperator::operator=(SplitOperator&&) noexcept = default;

double SplitOperator::dt() const { return impl_->dt; }
bool SplitOperator::absorbing() const { return !impl_->absorber.empty(); }

void SplitOperator::step(VibronicWavefunction& psi, std::size_t nsteps) {
  if (psi.rep != Representation::diabatic) throw std::invalid_argument("propagate: wavefunction must be diabatic");
  if (!(psi.grid == impl_->grid) || psi.n_states != impl_->n)
    throw std::invalid_argument("propagate: grid or state count mismatch");
  std::copy(psi.psi.begin(), psi.psi.end(), impl_->fft.data());
  for (std::size_t k = 0; k < nsteps; ++k) {
    impl_->kinetic_half();
    impl_->potential();
    impl_->kinetic_half();
    impl_->absorb();
  }
  std::copy(impl_->fft.data(), impl_->fft.data() + psi.psi.size(), psi.psi.begin());
  psi.time += static_cast<double>(nsteps) * impl_->dt;
}

double SplitOperator::energy(const VibronicWavefunction& psi) { return impl_->energy_of(psi); }

// ---------------------------------------------------------------------------

struct SurfacePropagator::Impl {
  SpatialGrid grid;
  std::vector<cd> upot;
  std::vector<cd> kin_half;
  FftBatch fft;

  Impl(const std::vector<double>& v, const SpatialGrid& g, double mass, double dt) : grid(g), fft(1, g.n_points) {
    const std::size_t np = g.n_points;
    upot.resize(np);
    kin_half.resize(np);
    for (std::size_t i = 0; i < np; ++i) upot[i] = std::polar(1.0, -v[i] * dt);
    for (std::size_t j = 0; j < np; ++j) {
      const double k = g.k(j);
      kin_half[j] = std::polar(1.0 / static_cast<double>(np), -k * k / (2.0 * mass) * 0.5 * dt);
    }
  }
};

SurfacePropagator::SurfacePropagator(std::vector<double> potential, const SpatialGrid& grid, double mass, double dt) {
  if (potential.size() != grid.n_points) throw std::invalid_argument("surface propagator: potential size mismatch");
  impl_ = std::make_unique<Impl>(potential, grid, mass, dt);
}
SurfacePropagator::~SurfacePropagator() = default;
SurfacePropagator::SurfacePropagator(SurfacePropagator&&) noexcept = default;

void SurfacePropagator::step(std::vector<cd>& chi, std::size_t nsteps) {
  const std::size_t np = impl_->grid.n_points;
  if (chi.size() != np) throw std::invalid_argument("surface propagator: size mismatch");
  cd* b = impl_->fft.data();
  std::copy(chi.begin(), chi.end(), b);
  for (std::size_t k = 0; k < nsteps; ++k) {
    impl_->fft.forward();
    for (std::size_t j = 0; j < np; ++j) b[j] *= impl_->kin_half[j];
    impl_->fft.backward();
    for (std::size_t i = 0; i < np; ++i) b[i] *= impl_->upot[i];
    impl_->fft.forward();
    for (std::size_t j = 0; j < np; ++j) b[j] *= impl_->kin_half[j];
    impl_->fft.backward();
  }
  std::copy(b, b + np, chi.begin());
}

// ---------------------------------------------------------------------------

namespace {

Observation observe(const VibronicWavefunction& diab, std::size_t step, double energy,
                    const bo::AdiabaticSurfaces* s) {
  Observation o;
  o.step = step;
  o.time = diab.time;
  o.norm = diab.norm();
  o.energy = energy;
  if (s == nullptr) {
    o.weights = diab.weights();
    for (int n = 0; n < diab.n_states; ++n) {
      const Moments m = moments(diab.state(n), diab.grid, 1.0);
      o.x_mean.push_back(m.x_mean);
      o.p_mean.push_back(m.p_mean);
    }
    const Eigen::MatrixXcd rho = electronic_density(diab);
    o.rho_el = rho;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho / rho.trace().real(), Eigen::EigenvaluesOnly);
    o.entropy = composite::entropy_of_weights(es.eigenvalues().cwiseMax(0.0));
    return o;
  }
  const VibronicWavefunction ad = bo::to_adiabatic(diab, *s);
  const BranchDecomposition dec = decompose(ad, *s);
  o.weights = dec.weights;
  for (int n = 0; n < ad.n_states; ++n) {
    const Moments m = moments(ad.state(n), ad.grid, s->mass);
    o.x_mean.push_back(m.x_mean);
    o.p_mean.push_back(m.p_mean);
  }
  o.branch_energy = dec.energies;
  const Eigen::MatrixXcd rho = electronic_density(ad);
  o.rho_el = rho;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho / rho.trace().real(), Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < 1e-14) ev(i) = 0.0;
  o.entropy = composite::entropy_of_weights(ev);
  return o;
}

double edge_density(const VibronicWavefunction& w, double fraction) {
  const std::size_t np = w.grid.n_points;
  const auto edge = std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(np)));
  double s = 0.0;
  for (int n = 0; n < w.n_states; ++n) {
    const cd* p = w.state(n);
    for (std::size_t i = 0; i < edge; ++i) s += std::norm(p[i]) + std::norm(p[np - 1 - i]);
  }
  return s * w.grid.dx();
}

}  // namespace

PropagationResult propagate(VibronicWavefunction psi, const DiabaticModel& model, const PropagateOptions& opts) {
  if (psi.rep != Representation::diabatic) throw std::invalid_argument("propagate: wavefunction must be diabatic");
  if (std::abs(psi.norm() - 1.0) > 1e-10) throw std::invalid_argument("propagate: wavefunction not normalized");
  PropagationResult res;
  GateReport& g = res.gates;
  g.requested_dt = opts.dt;
  double dt = opts.dt;
  std::size_t n_steps = opts.n_steps;
  std::size_t stride = opts.stride;

  SplitOperator prop(model, psi.grid, dt, opts.propagator);
  const double e0 = prop.energy(psi);
  const double escale = std::max(std::abs(e0), 1e-300);
  if (opts.validate_dt) {
    for (;;) {
      VibronicWavefunction trial = psi;
      prop.step(trial);
      g.trial_energy_change = std::abs(prop.energy(trial) - e0) / escale;
      if (g.trial_energy_change <= opts.dt_gate) break;
      if (g.halvings >= 20) {
        g.dt_gate_passed = false;
        g.messages.push_back("dt gate: per-step energy change " + num(g.trial_energy_change) +
                             " after 20 halvings");
        break;
      }
      dt *= 0.5;
      n_steps *= 2;
      stride *= 2;
      ++g.halvings;
      prop = SplitOperator(model, psi.grid, dt, opts.propagator);
    }
  }
  g.dt = dt;
  if (g.halvings > 0) g.messages.push_back("dt halved " + std::to_string(g.halvings) + " time(s) to " + num(dt));

  const bool absorbing = prop.absorbing();
  auto sample = [&](std::size_t step) {
    const double e = prop.energy(psi);
    if (!absorbing) g.energy_drift = std::max(g.energy_drift, std::abs(e - e0) / escale);
    res.series.push_back(observe(psi, step, e, opts.surfaces));
    if (opts.observer) opts.observer(Snapshot{step, psi});
  };

  sample(0);
  double prev_norm = psi.norm();
  const double norm0 = prev_norm;
  for (std::size_t step = 1; step <= n_steps; ++step) {
    prop.step(psi);
    const double nrm = psi.norm();
    if (!std::isfinite(nrm)) {
      g.norm_gate_passed = false;
      g.messages.push_back("NaN encountered at step " + std::to_string(step) + "; aborted");
      break;
    }
    if (!absorbing) {
      g.max_step_norm_drift = std::max(g.max_step_norm_drift, std::abs(nrm - prev_norm));
      g.norm_drift = std::max(g.norm_drift, std::abs(nrm - norm0));
    }
    prev_norm = nrm;
    if (!g.boundary_warning && !absorbing) {
      const double edge = edge_density(psi, opts.boundary_fraction);
      if (edge > opts.boundary_tol) {
        g.boundary_warning = true;
        g.boundary_step = step;
        g.boundary_density = edge;
        g.messages.push_back("boundary flux " + num(edge) + " first exceeded tolerance at step " +
                             std::to_string(step));
      }
    }
    if ((stride > 0 && step % stride == 0) || step == n_steps) sample(step);
  }
  if (g.max_step_norm_drift > opts.norm_step_gate) {
    g.norm_gate_passed = false;
    g.messages.push_back("norm gate: per-step drift " + num(g.max_step_norm_drift));
  }
  if (g.energy_drift > opts.energy_gate) {
    g.energy_gate_passed = false;
    g.messages.push_back("energy gate: relative drift " + num(g.energy_drift));
  }
  res.final = std::move(psi);
  return res;
}

// ---------------------------------------------------------------------------

BranchDecomposition decompose(const VibronicWavefunction& psi, const bo::AdiabaticSurfaces& s) {
  if (psi.rep != Representation::adiabatic) throw std::invalid_argument("decompose: wavefunction must be adiabatic");
  if (!(psi.grid == s.grid)) throw std::invalid_argument("decompose: grid mismatch");
  BranchDecomposition d;
  const std::size_t np = psi.grid.n_points;
  const double dx = psi.grid.dx();
  for (int n = 0; n < psi.n_states; ++n) {
    const double w = psi.weight(n);
    const double c = std::sqrt(w);
    d.weights.push_back(w);
    d.branch_norms.push_back(c);
    std::vector<cd> chi(np, cd(0.0, 0.0));
    double e = 0.0;
    if (c > kEmptyBranch) {
      const cd* p = psi.state(n);
      for (std::size_t i = 0; i < np; ++i) chi[i] = p[i] / c;
      const Moments m = moments(chi.data(), psi.grid, s.mass);
      double v = 0.0;
      for (std::size_t i = 0; i < np; ++i) v += std::norm(chi[i]) * s.energy(n, i);
      e = m.kinetic + v * dx;
      d.empty.push_back(0);
    } else {
      d.empty.push_back(1);
    }
    d.conditional.push_back(std::move(chi));
    d.energies.push_back(e);
  }
  return d;
}

Eigen::MatrixXcd electronic_density(const VibronicWavefunction& psi) {
  const int n = psi.n_states;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) {
      cd acc = 0.0;
      const cd* pa = psi.state(a);
      const cd* pb = psi.state(b);
      for (std::size_t i = 0; i < psi.grid.n_points; ++i) acc += pa[i] * std::conj(pb[i]);
      rho(a, b) = acc * psi.grid.dx();
      rho(b, a) = std::conj(rho(a, b));
    }
  return rho;
}

double branch_overlap(const VibronicWavefunction& adiabatic, int n, int m) {
  const double wn = adiabatic.weight(n), wm = adiabatic.weight(m);
  if (wn <= 0.0 || wm <= 0.0) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < adiabatic.grid.n_points; ++i)
    acc += std::abs(adiabatic.at(n, i)) * std::abs(adiabatic.at(m, i));
  return acc * adiabatic.grid.dx() / std::sqrt(wn * wm);
}

ReducedEquationReport check_reduced_equations(const std::vector<VibronicWavefunction>& snapshots,
                                              const bo::AdiabaticSurfaces& s, const std::vector<char>& mask,
                                              double dt_single, double support_tol) {
  ReducedEquationReport rep;
  if (snapshots.size() < 2) {
    rep.reason = "need at least two snapshots";
    return rep;
  }
  if (mask.size() != s.grid.n_points) throw std::invalid_argument("check_reduced_equations: mask size mismatch");
  std::vector<BranchDecomposition> dec;
  for (const auto& w : snapshots) dec.push_back(decompose(w, s));
  const int ns = s.n_states;
  const std::size_t np = s.grid.n_points;
  const double dx = s.grid.dx();
  // support precondition
  for (std::size_t k = 0; k < dec.size(); ++k)
    for (int n = 0; n < ns; ++n) {
      if (dec[k].empty[static_cast<std::size_t>(n)]) continue;
      double inside = 0.0;
      const auto& chi = dec[k].conditional[static_cast<std::size_t>(n)];
      for (std::size_t i = 0; i < np; ++i)
        if (mask[i]) inside += std::norm(chi[i]);
      inside *= dx;
      if (inside < 1.0 - support_tol) {
        std::ostringstream os;
        os << "branch " << n << " has " << (1.0 - inside) << " of its norm inside a coupling window at t="
           << snapshots[k].time;
        rep.reason = os.str();
        return rep;
      }
    }
  rep.applicable = true;
  for (int n = 0; n < ns; ++n) {
    const auto un = static_cast<std::size_t>(n);
    for (const auto& d : dec) rep.max_weight_drift = std::max(rep.max_weight_drift, std::abs(d.weights[un] - dec[0].weights[un]));
    if (dec[0].empty[un]) continue;
    // phase rate of the conditional against -E_n
    for (std::size_t k = 0; k + 1 < dec.size(); ++k) {
      const double dt = snapshots[k + 1].time - snapshots[k].time;
      cd ov = 0.0;
      for (std::size_t i = 0; i < np; ++i)
        ov += std::conj(dec[k].conditional[un][i]) * dec[k + 1].conditional[un][i];
      // the overlap phase is only known modulo 2 pi, so compare against the prediction on the circle
      const double e = 0.5 * (dec[k].energies[un] + dec[k + 1].energies[un]);
      const double miss = std::arg(ov * std::exp(cd(0.0, e * dt)));
      rep.energy_scale = std::max(rep.energy_scale, std::abs(e));
      rep.phase_rate_residual = std::max(rep.phase_rate_residual, std::abs(miss) / dt);
    }
    // independent single-surface propagation of the initial conditional
    std::vector<double> v(np);
    for (std::size_t i = 0; i < np; ++i) v[i] = s.energy(n, i);
    std::vector<cd> chi = dec[0].conditional[un];
    for (std::size_t k = 1; k < dec.size(); ++k) {
      const double span = snapshots[k].time - snapshots[k - 1].time;
      const auto sub = static_cast<std::size_t>(std::max(1.0, std::ceil(span / dt_single - 1e-9)));
      SurfacePropagator sp(v, s.grid, s.mass, span / static_cast<double>(sub));
      sp.step(chi, sub);
      cd ov = 0.0;
      for (std::size_t i = 0; i < np; ++i) ov += std::conj(dec[k].conditional[un][i]) * chi[i];
      ov *= dx;
      rep.conditional_fidelity = std::min(rep.conditional_fidelity, std::abs(ov));
      rep.phase_fidelity = std::min(rep.phase_fidelity, ov.real());
    }
  }
  return rep;
}

ChannelOutcome scattering_outcomes(const VibronicWavefunction& adiabatic, const std::vector<ChannelSpec>& channels,
                                   double leak_tol) {
  if (adiabatic.rep != Representation::adiabatic)
    throw std::invalid_argument("scattering_outcomes: wavefunction must be adiabatic");
  const std::size_t np = adiabatic.grid.n_points;
  const double dx = adiabatic.grid.dx();
  std::vector<std::vector<char>> assigned(static_cast<std::size_t>(adiabatic.n_states), std::vector<char>(np, 0));
  ChannelOutcome out;
  double total = 0.0;
  for (const auto& c : channels) {
    if (c.surface < 0 || c.surface >= adiabatic.n_states)
      throw std::invalid_argument("scattering_outcomes: channel '" + c.name + "' has invalid surface");
    double acc = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      const double x = adiabatic.grid.x(i);
      if (x < c.x_lo || x >= c.x_hi) continue;
      auto& flag = assigned[static_cast<std::size_t>(c.surface)][i];
      if (flag) throw std::invalid_argument("scattering_outcomes: channel '" + c.name + "' overlaps another channel");
      flag = 1;
      acc += std::norm(adiabatic.at(c.surface, i));
    }
    out.names.push_back(c.name);
    out.raw.push_back(acc * dx);
    total += acc * dx;
  }
  double un = 0.0, worst = 0.0;
  double worst_x = 0.0;
  int worst_s = 0;
  for (int n = 0; n < adiabatic.n_states; ++n)
    for (std::size_t i = 0; i < np; ++i)
      if (!assigned[static_cast<std::size_t>(n)][i]) {
        const double d = std::norm(adiabatic.at(n, i));
        un += d;
        if (d > worst) {
          worst = d;
          worst_x = adiabatic.grid.x(i);
          worst_s = n;
        }
      }
  out.unassigned = un * dx;
  if (out.unassigned > leak_tol) {
    std::ostringstream os;
    os << "scattering_outcomes: unassigned probability " << out.unassigned << " exceeds " << leak_tol
       << "; largest leak on surface " << worst_s << " near x=" << worst_x;
    throw std::runtime_error(os.str());
  }
  for (double r : out.raw) out.probabilities.push_back(total > 0.0 ? r / total : 0.0);
  return out;
}

}  // namespace vibro::exact

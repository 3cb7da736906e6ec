#include "vibrolab/mqc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vibro::mqc {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::mt19937_64 trajectory_rng(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed;
  const std::uint64_t base = splitmix64(s);
  std::uint64_t t = base ^ (index * 0xD1B54A32D192ED03ULL);
  std::seed_seq seq{splitmix64(t), splitmix64(t), splitmix64(t), splitmix64(t)};
  return std::mt19937_64(seq);
}

ChannelStats tally_channels(const std::vector<exact::ChannelSpec>& channels, const std::vector<double>& x,
                            const std::vector<std::vector<double>>& surface_weights, std::size_t n_samples) {
  ChannelStats st;
  st.probabilities.assign(channels.size(), 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    for (std::size_t n = 0; n < surface_weights[t].size(); ++n) {
      const double w = surface_weights[t][n];
      if (w == 0.0) continue;
      total += w;
      bool hit = false;
      for (std::size_t c = 0; c < channels.size(); ++c) {
        const auto& ch = channels[c];
        if (ch.surface == static_cast<int>(n) && x[t] >= ch.x_lo && x[t] < ch.x_hi) {
          st.probabilities[c] += w;
          hit = true;
          break;
        }
      }
      if (!hit) st.unassigned += w;
    }
  }
  for (std::size_t c = 0; c < channels.size(); ++c) {
    st.names.push_back(channels[c].name);
    if (total > 0.0) st.probabilities[c] /= total;
    const double p = st.probabilities[c];
    st.std_error.push_back(n_samples > 0 ? std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n_samples))
                                         : 0.0);
  }
  if (total > 0.0) st.unassigned /= total;
  return st;
}

// ---------------------------------------------------------------------------
// Ehrenfest: diabatic amplitudes, classical nucleus on the mean-field surface.

namespace {

struct EhState {
  double x, p;
  SmallCVec c;
};

EhState eh_rhs(const EhState& y, const DiabaticModel& model, double mass, SmallMat& v, SmallMat& dv) {
  const int n = model.n_states();
  v.resize(n, n);
  dv.resize(n, n);
  if (model.has_sym2()) {
    Sym2 a, b;
    model.eval2(y.x, a, b);
    v << a.v11, a.v12, a.v12, a.v22;
    dv << b.v11, b.v12, b.v12, b.v22;
  } else {
    v = model.potential(y.x);
    dv = model.gradient(y.x);
  }
  EhState d;
  d.x = y.p / mass;
  d.p = -(y.c.adjoint() * dv.cast<cd>() * y.c)(0, 0).real();
  d.c = cd(0.0, -1.0) * (v.cast<cd>() * y.c);
  return d;
}

double eh_energy(const EhState& y, const DiabaticModel& model, double mass) {
  const Eigen::MatrixXd v = model.potential(y.x);
  return y.p * y.p / (2.0 * mass) + (y.c.adjoint() * v.cast<cd>() * y.c)(0, 0).real();
}

TrajectorySample eh_sample(const EhState& y, double t, double e, const LocalElectronic& el) {
  TrajectorySample s;
  s.time = t;
  s.x = y.x;
  s.p = y.p;
  s.energy = e;
  const ElectronicPoint pt = el.at(y.x);
  const SmallCVec ca = pt.frame.transpose().cast<cd>() * y.c;
  for (Eigen::Index k = 0; k < ca.size(); ++k) s.populations.push_back(std::norm(ca(k)));
  Eigen::Index imax = 0;
  ca.cwiseAbs2().maxCoeff(&imax);
  s.active = static_cast<int>(imax);
  return s;
}

}  // namespace

EhrenfestResult ehrenfest_run(double x0, double p0, const SmallCVec& el_amp0, const DiabaticModel& model,
                              const EhrenfestOptions& opts) {
  if (el_amp0.size() != model.n_states()) throw std::invalid_argument("ehrenfest_run: amplitude size mismatch");
  if (std::abs(el_amp0.norm() - 1.0) > 1e-10) throw std::invalid_argument("ehrenfest_run: amplitudes not normalized");
  if (!(opts.dt > 0.0)) throw std::invalid_argument("ehrenfest_run: dt must be positive");
  const double mass = model.mass();
  LocalElectronic el(model);
  EhrenfestResult res;
  EhState y{x0, p0, el_amp0};
  const double e0 = eh_energy(y, model, mass);
  const double scale = std::max(std::abs(e0), 1e-300);
  SmallMat v, dv;
  double t = 0.0;
  res.series.push_back(eh_sample(y, t, e0, el));
  std::size_t step = 0;
  for (step = 1; step <= opts.n_steps; ++step) {
    const double h = opts.dt;
    auto add = [](const EhState& a, const EhState& d, double s) {
      return EhState{a.x + s * d.x, a.p + s * d.p, a.c + s * d.c};
    };
    const EhState k1 = eh_rhs(y, model, mass, v, dv);
    const EhState k2 = eh_rhs(add(y, k1, 0.5 * h), model, mass, v, dv);
    const EhState k3 = eh_rhs(add(y, k2, 0.5 * h), model, mass, v, dv);
    const EhState k4 = eh_rhs(add(y, k3, h), model, mass, v, dv);
    y.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
    y.p += h / 6.0 * (k1.p + 2.0 * k2.p + 2.0 * k3.p + k4.p);
    y.c += h / 6.0 * (k1.c + 2.0 * k2.c + 2.0 * k3.c + k4.c);
    y.c /= y.c.norm();
    t += h;
    const double e = eh_energy(y, model, mass);
    const double err = std::abs(e - e0) / scale;
    res.max_energy_error = std::max(res.max_energy_error, err);
    if (err > opts.energy_gate) {
      std::ostringstream os;
      os << "energy drift " << err << " exceeds " << opts.energy_gate << " at t=" << t << " (x=" << y.x
         << "); reduce dt";
      res.aborted = true;
      res.diagnostic = os.str();
      res.series.push_back(eh_sample(y, t, e, el));
      break;
    }
    const bool out = y.x < opts.x_lo || y.x > opts.x_hi;
    if ((opts.stride > 0 && step % opts.stride == 0) || step == opts.n_steps || out)
      res.series.push_back(eh_sample(y, t, e, el));
    if (out) break;
  }
  res.final.x = y.x;
  res.final.p = y.p;
  res.final.time = t;
  res.final.amp = y.c;
  res.final.active = res.series.back().active;
  res.final.alive = false;
  return res;
}

// ---------------------------------------------------------------------------
// Shared adiabatic trajectory machinery.

namespace {

void sample_phase_space(std::mt19937_64& rng, const PhaseSpaceSpec& s, double& x, double& p) {
  std::normal_distribution<double> gx(s.x0, s.sigma);
  std::normal_distribution<double> gp(s.k0, 0.5 / s.sigma);
  x = gx(rng);
  p = gp(rng);
}

// Mean surface (sum_m |u_m|^2 e_m) and its gradient for a fixed adiabatic vector u.
void mean_surface(const ElectronicPoint& pt, const Eigen::VectorXd& u2, double& e, double& g) {
  e = 0.0;
  g = 0.0;
  for (Eigen::Index m = 0; m < u2.size(); ++m) {
    e += u2(m) * pt.energy(m);
    g += u2(m) * pt.gradient(m);
  }
}

TrajectorySample adiabatic_sample(const Trajectory& tr, double e, const SmallCVec& c) {
  TrajectorySample s;
  s.time = tr.time;
  s.x = tr.x;
  s.p = tr.p;
  s.energy = e;
  s.active = tr.active;
  for (Eigen::Index k = 0; k < c.size(); ++k) s.populations.push_back(std::norm(c(k)));
  return s;
}

// Per-trajectory sample slots at fixed step multiples.
struct Slots {
  std::size_t count = 0;
  std::size_t stride = 0;
  std::vector<double> x, p;
  std::vector<int> active;
  std::vector<SmallCVec> amp;
};

void build_series(EnsembleResult& res, const std::vector<Slots>& slots, const std::vector<double>& weights,
                  double dt, int n, bool active_projector) {
  if (slots.empty() || slots.front().count == 0) return;
  const std::size_t ns = slots.front().count;
  for (std::size_t k = 0; k < ns; ++k) {
    EnsembleSample es;
    es.time = static_cast<double>(k * slots.front().stride) * dt;
    es.rho_el = Eigen::MatrixXcd::Zero(n, n);
    es.surface_fraction.assign(static_cast<std::size_t>(n), 0.0);
    for (std::size_t t = 0; t < slots.size(); ++t) {
      const double w = weights[t];
      const int a = slots[t].active[k];
      es.surface_fraction[static_cast<std::size_t>(a)] += w;
      if (active_projector) {
        es.rho_el(a, a) += w;
      } else {
        const SmallCVec& c = slots[t].amp[k];
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) es.rho_el(i, j) += w * c(i) * std::conj(c(j));
      }
    }
    res.series.push_back(std::move(es));
  }
}

}  // namespace

EnsembleResult fssh_run(const DiabaticModel& model, const FsshOptions& opts) {
  if (opts.n_traj < 1) throw std::invalid_argument("fssh_run: n_traj must be >= 1");
  if (!(opts.dt > 0.0)) throw std::invalid_argument("fssh_run: dt must be positive");
  if (!(opts.sampling.sigma > 0.0)) throw std::invalid_argument("fssh_run: sampling width must be positive");
  const int n = model.n_states();
  if (opts.initial_surface < 0 || opts.initial_surface >= n)
    throw std::invalid_argument("fssh_run: initial surface out of range");
  const LocalElectronic el(model);
  const double mass = model.mass();
  EnsembleResult res;
  res.scheme = "fssh";
  res.seed = opts.seed;
  res.n_states = n;
  res.trajectories.resize(opts.n_traj);
  std::vector<Slots> slots(opts.n_traj);
  std::vector<std::size_t> hops(opts.n_traj, 0), frustrated(opts.n_traj, 0);
  std::vector<double> eerr(opts.n_traj, 0.0);
  const std::size_t n_samples = opts.stride > 0 ? opts.n_steps / opts.stride + 1 : 0;

  auto run_one = [&](std::size_t idx) {
    Trajectory& tr = res.trajectories[idx];
    tr.rng = trajectory_rng(opts.seed, idx);
    sample_phase_space(tr.rng, opts.sampling, tr.x, tr.p);
    tr.active = opts.initial_surface;
    tr.amp = SmallCVec::Zero(n);
    tr.amp(tr.active) = 1.0;
    tr.weight = 1.0 / static_cast<double>(opts.n_traj);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Slots& sl = slots[idx];
    sl.stride = opts.stride;
    ElectronicPoint pt = el.at(tr.x);
    double eref = tr.p * tr.p / (2.0 * mass) + pt.energy(tr.active);
    auto record = [&]() {
      if (opts.stride == 0) return;
      sl.x.push_back(tr.x);
      sl.p.push_back(tr.p);
      sl.active.push_back(tr.active);
      sl.amp.push_back(tr.amp);
      ++sl.count;
    };
    record();
    if (opts.keep_history) tr.history.push_back(adiabatic_sample(tr, eref, tr.amp));
    std::size_t step = 1;
    for (; step <= opts.n_steps; ++step) {
      const double va = tr.p / mass;
      const double pa = tr.p;
      const double ph = tr.p - 0.5 * opts.dt * pt.gradient(tr.active);
      const double xn = tr.x + opts.dt * ph / mass;
      ElectronicPoint pn = el.at(xn, &pt);
      tr.p = ph - 0.5 * opts.dt * pn.gradient(tr.active);
      tr.x = xn;
      tr.time += opts.dt;
      const double vb = tr.p / mass;
      propagate_amplitudes(tr.amp, pt, va, pn, vb, opts.dt);
      pt = std::move(pn);
      (void)pa;
      // fewest switches
      const int a = tr.active;
      const double pa2 = std::norm(tr.amp(a));
      const double xi = uni(tr.rng);
      if (pa2 > 1e-300) {
        double acc = 0.0;
        for (int m = 0; m < n; ++m) {
          if (m == a) continue;
          const double flux = 2.0 * vb * pt.d1(a, m) * (std::conj(tr.amp(m)) * tr.amp(a)).real();
          acc += std::max(0.0, flux * opts.dt / pa2);
          if (xi < acc) {
            const double ke = tr.p * tr.p / (2.0 * mass) + pt.energy(a) - pt.energy(m);
            if (ke >= 0.0) {
              tr.p = (tr.p >= 0.0 ? 1.0 : -1.0) * std::sqrt(2.0 * mass * ke);
              tr.active = m;
              ++hops[idx];
              eref = tr.p * tr.p / (2.0 * mass) + pt.energy(m);
            } else {
              ++frustrated[idx];
              if (opts.frustrated == FrustratedPolicy::reverse) tr.p = -tr.p;
            }
            break;
          }
        }
      }
      const double e = tr.p * tr.p / (2.0 * mass) + pt.energy(tr.active);
      eerr[idx] = std::max(eerr[idx], std::abs(e - eref) / std::max(std::abs(eref), 1e-300));
      if (opts.keep_history && opts.stride > 0 && step % opts.stride == 0)
        tr.history.push_back(adiabatic_sample(tr, e, tr.amp));
      if (opts.stride > 0 && step % opts.stride == 0) record();
      if (tr.x < opts.x_lo || tr.x > opts.x_hi) break;
    }
    tr.alive = false;
    // frozen after exit
    while (opts.stride > 0 && sl.count < n_samples) record();
  };

  const auto nt = static_cast<long long>(opts.n_traj);
  if (opts.exec == kernels::Exec::serial) {
    for (long long i = 0; i < nt; ++i) run_one(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic, 8)
    for (long long i = 0; i < nt; ++i) run_one(static_cast<std::size_t>(i));
  }

  std::size_t attempts = 0;
  for (std::size_t i = 0; i < opts.n_traj; ++i) {
    res.hops += hops[i];
    res.frustrated += frustrated[i];
    res.max_energy_error = std::max(res.max_energy_error, eerr[i]);
  }
  attempts = res.hops + res.frustrated;
  res.frustrated_fraction = attempts > 0 ? static_cast<double>(res.frustrated) / static_cast<double>(attempts) : 0.0;
  if (res.frustrated_fraction > 0.5) {
    std::ostringstream os;
    os << "frustrated hop fraction " << res.frustrated_fraction << " exceeds 0.5";
    res.warnings.push_back(os.str());
  }
  std::vector<double> xs, ws(opts.n_traj);
  std::vector<std::vector<double>> sw;
  for (std::size_t i = 0; i < opts.n_traj; ++i) {
    const auto& tr = res.trajectories[i];
    xs.push_back(tr.x);
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    w[static_cast<std::size_t>(tr.active)] = tr.weight;
    sw.push_back(std::move(w));
    ws[i] = tr.weight;
  }
  res.channels = tally_channels(opts.channels, xs, sw, opts.n_traj);
  build_series(res, slots, ws, opts.dt, n, true);
  return res;
}

// ---------------------------------------------------------------------------

void mixture_basis(const MixtureOptions& opts, int n_states, Eigen::MatrixXd& basis, std::vector<double>& weights) {
  if (static_cast<int>(opts.amplitudes.size()) != n_states)
    throw std::invalid_argument("mixture: amplitude count must equal the state count");
  double nrm = 0.0;
  for (const auto& a : opts.amplitudes) nrm += std::norm(a);
  if (std::abs(nrm - 1.0) > 1e-10) throw std::invalid_argument("mixture: weights must sum to 1");
  basis = Eigen::MatrixXd::Identity(n_states, n_states);
  if (opts.basis_rotation != 0.0) {
    if (n_states != 2) throw std::invalid_argument("mixture: basis rotation needs two states");
    const double c = std::cos(opts.basis_rotation), s = std::sin(opts.basis_rotation);
    basis << c, -s, s, c;
  }
  weights.assign(static_cast<std::size_t>(n_states), 0.0);
  for (int k = 0; k < n_states; ++k) {
    cd d = 0.0;
    for (int m = 0; m < n_states; ++m) d += basis(m, k) * opts.amplitudes[static_cast<std::size_t>(m)];
    weights[static_cast<std::size_t>(k)] = std::norm(d);
  }
}

EnsembleResult classical_mixture_run(const DiabaticModel& model, const MixtureOptions& opts) {
  const int n = model.n_states();
  if (opts.n_traj_per_branch < 1) throw std::invalid_argument("mixture: need at least one trajectory per branch");
  if (!(opts.dt > 0.0)) throw std::invalid_argument("mixture: dt must be positive");
  Eigen::MatrixXd basis;
  std::vector<double> bw;
  mixture_basis(opts, n, basis, bw);
  const LocalElectronic el(model);
  const double mass = model.mass();
  EnsembleResult res;
  res.scheme = opts.basis_rotation == 0.0 ? "mixture" : "mixture-rotated";
  res.seed = opts.seed;
  res.n_states = n;
  std::vector<int> branch_of;
  for (int k = 0; k < n; ++k)
    if (bw[static_cast<std::size_t>(k)] > 1e-14)
      for (std::size_t j = 0; j < opts.n_traj_per_branch; ++j) branch_of.push_back(k);
  const std::size_t nt = branch_of.size();
  res.trajectories.resize(nt);
  std::vector<Slots> slots(nt);
  std::vector<double> eerr(nt, 0.0);
  const std::size_t n_samples = opts.stride > 0 ? opts.n_steps / opts.stride + 1 : 0;

  auto run_one = [&](std::size_t idx) {
    Trajectory& tr = res.trajectories[idx];
    const int k = branch_of[idx];
    // same draw sequence per branch slot so branches share phase-space samples
    const std::size_t slot = idx % opts.n_traj_per_branch;
    tr.rng = trajectory_rng(opts.seed, slot);
    sample_phase_space(tr.rng, opts.sampling, tr.x, tr.p);
    tr.active = k;
    tr.weight = bw[static_cast<std::size_t>(k)] / static_cast<double>(opts.n_traj_per_branch);
    tr.amp = basis.col(k).cast<cd>();
    const Eigen::VectorXd u2 = basis.col(k).cwiseAbs2();
    Slots& sl = slots[idx];
    sl.stride = opts.stride;
    auto record = [&]() {
      if (opts.stride == 0) return;
      sl.x.push_back(tr.x);
      sl.p.push_back(tr.p);
      sl.active.push_back(tr.active);
      sl.amp.push_back(tr.amp);
      ++sl.count;
    };
    ElectronicPoint pt = el.at(tr.x);
    double e_s, g_s;
    mean_surface(pt, u2, e_s, g_s);
    const double e0 = tr.p * tr.p / (2.0 * mass) + e_s;
    record();
    if (opts.keep_history) tr.history.push_back(adiabatic_sample(tr, e0, tr.amp));
    for (std::size_t step = 1; step <= opts.n_steps; ++step) {
      const double ph = tr.p - 0.5 * opts.dt * g_s;
      tr.x += opts.dt * ph / mass;
      pt = el.at(tr.x, &pt);
      mean_surface(pt, u2, e_s, g_s);
      tr.p = ph - 0.5 * opts.dt * g_s;
      tr.time += opts.dt;
      const double e = tr.p * tr.p / (2.0 * mass) + e_s;
      eerr[idx] = std::max(eerr[idx], std::abs(e - e0) / std::max(std::abs(e0), 1e-300));
      if (opts.stride > 0 && step % opts.stride == 0) {
        record();
        if (opts.keep_history) tr.history.push_back(adiabatic_sample(tr, e, tr.amp));
      }
      if (tr.x < opts.x_lo || tr.x > opts.x_hi) break;
    }
    tr.alive = false;
    while (opts.stride > 0 && sl.count < n_samples) record();
  };

  const auto ntl = static_cast<long long>(nt);
  if (opts.exec == kernels::Exec::serial) {
    for (long long i = 0; i < ntl; ++i) run_one(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic, 8)
    for (long long i = 0; i < ntl; ++i) run_one(static_cast<std::size_t>(i));
  }
  std::vector<double> xs, ws(nt);
  std::vector<std::vector<double>> sw;
  for (std::size_t i = 0; i < nt; ++i) {
    const auto& tr = res.trajectories[i];
    xs.push_back(tr.x);
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    for (int m = 0; m < n; ++m) w[static_cast<std::size_t>(m)] = tr.weight * std::norm(tr.amp(m));
    sw.push_back(std::move(w));
    ws[i] = tr.weight;
    res.max_energy_error = std::max(res.max_energy_error, eerr[i]);
  }
  res.channels = tally_channels(opts.channels, xs, sw, opts.n_traj_per_branch);
  build_series(res, slots, ws, opts.dt, n, false);
  return res;
}

}  // namespace vibro::mqc

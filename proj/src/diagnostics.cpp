#include "vibrolab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace vibro::diag {

EntanglementReport entanglement_from_density(const Eigen::MatrixXcd& rho) {
  EntanglementReport r;
  const double tr = rho.trace().real();
  if (!(tr > 0.0)) throw std::invalid_argument("entanglement: density has zero trace");
  const Eigen::MatrixXcd h = 0.5 * (rho + rho.adjoint()) / tr;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h, Eigen::EigenvaluesOnly);
  std::vector<double> lam(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(lam.rbegin(), lam.rend());
  for (double l : lam) {
    const double v = std::max(0.0, l);
    r.schmidt_coefficients.push_back(std::sqrt(v));
    if (v > 1e-8) ++r.rank_eps;
    if (v > 1e-14) r.entropy -= v * std::log(v);
  }
  if (r.rank_eps <= 1) r.entropy = 0.0;
  r.entropy = std::max(0.0, r.entropy);
  const auto n = rho.rows();
  r.branch_overlaps = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      const double den = std::sqrt(std::max(0.0, rho(a, a).real()) * std::max(0.0, rho(b, b).real()));
      r.branch_overlaps(a, b) = den > 0.0 ? std::abs(rho(a, b)) / den : 0.0;
    }
  return r;
}

EntanglementReport vibronic_entropy(const VibronicWavefunction& psi, const bo::AdiabaticSurfaces& s) {
  const double nrm = psi.norm();
  if (std::abs(nrm - 1.0) > 1e-6) throw std::invalid_argument("vibronic_entropy: wavefunction is not normalized");
  if (psi.rep == Representation::adiabatic) return entanglement_from_density(exact::electronic_density(psi));
  return entanglement_from_density(exact::electronic_density(bo::to_adiabatic(psi, s)));
}

DeviationSeries diagonal_deviation_series(const std::vector<exact::Observation>& exact_series,
                                          const std::vector<mqc::EnsembleSample>& mixture_series,
                                          const Eigen::MatrixXcd& frame, double tolerance) {
  if (exact_series.size() != mixture_series.size())
    throw std::invalid_argument("diagonal_deviation_series: series lengths differ (" +
                                std::to_string(exact_series.size()) + " vs " +
                                std::to_string(mixture_series.size()) + ")");
  DeviationSeries out;
  out.tolerance = tolerance;
  for (std::size_t k = 0; k < exact_series.size(); ++k) {
    const auto& e = exact_series[k];
    const auto& m = mixture_series[k];
    if (std::abs(e.time - m.time) > 1e-9 * std::max(1.0, std::abs(e.time))) {
      std::ostringstream os;
      os << "diagonal_deviation_series: misaligned sample " << k << " (t=" << e.time << " vs " << m.time << ")";
      throw std::invalid_argument(os.str());
    }
    if (e.rho_el.rows() != frame.rows() || m.rho_el.rows() != frame.rows())
      throw std::invalid_argument("diagonal_deviation_series: frame dimension mismatch");
    const Eigen::MatrixXcd re = e.rho_el / e.rho_el.trace().real();
    const Eigen::MatrixXcd rm = m.rho_el / m.rho_el.trace().real();
    double dev = 0.0;
    for (Eigen::Index l = 0; l < frame.cols(); ++l) {
      const double pe = (frame.col(l).adjoint() * re * frame.col(l))(0, 0).real();
      const double pm = (frame.col(l).adjoint() * rm * frame.col(l))(0, 0).real();
      dev = std::max(dev, std::abs(pe - pm));
    }
    out.time.push_back(e.time);
    out.deviation.push_back(dev);
    out.max_deviation = std::max(out.max_deviation, dev);
  }
  return out;
}

std::vector<double> smooth3(const std::vector<double>& y) {
  if (y.size() < 3) return y;
  std::vector<double> s(y.size());
  s.front() = y.front();
  s.back() = y.back();
  for (std::size_t i = 1; i + 1 < y.size(); ++i) s[i] = (y[i - 1] + y[i] + y[i + 1]) / 3.0;
  return s;
}

OscillationMetrics oscillation_metrics(const std::vector<double>& y, double noise) {
  OscillationMetrics m;
  if (y.size() < 3) return m;
  const std::vector<double> s = smooth3(y);
  const auto [lo_it, hi_it] = std::minmax_element(s.begin(), s.end());
  m.amplitude = *hi_it - *lo_it;
  // Turning points with hysteresis: a reversal counts once the curve has
  // moved back by more than the noise threshold.
  int dir = 0;
  double ext = s.front(), lo = s.front(), hi = s.front();
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double v = s[i];
    if (dir == 0) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (v - lo > noise) {
        if (s.front() - lo > noise) ++m.extrema;
        dir = 1;
        ext = v;
      } else if (hi - v > noise) {
        if (hi - s.front() > noise) ++m.extrema;
        dir = -1;
        ext = v;
      }
    } else if (dir > 0) {
      if (v > ext) {
        ext = v;
      } else if (ext - v > noise) {
        ++m.extrema;
        dir = -1;
        ext = v;
      }
    } else {
      if (v < ext) {
        ext = v;
      } else if (v - ext > noise) {
        ++m.extrema;
        dir = 1;
        ext = v;
      }
    }
  }
  return m;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return 0.0;
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

std::vector<double> SchemeCurve::focus(int channel) const {
  std::vector<double> f;
  for (const auto& p : probabilities)
    f.push_back(channel >= 0 && static_cast<std::size_t>(channel) < p.size() ? p[static_cast<std::size_t>(channel)]
                                                                             : 0.0);
  return f;
}

const SchemeCurve* ScanResult::find(const std::string& scheme) const {
  for (const auto& c : curves)
    if (c.scheme == scheme) return &c;
  return nullptr;
}

void analyze_scan(ScanResult& scan) {
  const SchemeCurve* ex = scan.find("exact");
  std::vector<double> ref;
  std::vector<char> ref_ok;
  if (ex != nullptr) {
    ref = ex->focus(scan.focus_channel);
    ref_ok = ex->ok;
  }
  for (auto& c : scan.curves) {
    double se = 0.0;
    for (double e : c.std_error) se = std::max(se, e);
    c.noise = se > 0.0 ? 3.0 * se : kDeterministicNoise;
    std::vector<double> y;
    std::vector<double> yr, yc;
    const std::vector<double> f = c.focus(scan.focus_channel);
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (!c.ok[i]) continue;
      y.push_back(f[i]);
      if (ex != nullptr && i < ref.size() && ref_ok[i]) {
        yr.push_back(ref[i]);
        yc.push_back(f[i]);
      }
    }
    c.metrics = oscillation_metrics(y, c.noise);
    c.correlation = ex != nullptr ? pearson(yc, yr) : 0.0;
  }
}

ParamMap stueckelberg_params() {
  const double xc = 10.0, a = 0.035, e0 = 0.02;
  return {{"A", a}, {"B", std::log(a / e0) / (xc * xc)}, {"C", 0.006}, {"D", 1.0}, {"E0", e0}, {"coupling_offset", xc}};
}

std::vector<exact::ChannelSpec> default_scan_channels(const SpatialGrid& grid) {
  return {{"lower_reflected", 0, grid.x_min, 0.0},
          {"lower_transmitted", 0, 0.0, grid.x_max},
          {"upper_reflected", 1, grid.x_min, 0.0},
          {"upper_transmitted", 1, 0.0, grid.x_max}};
}

namespace {

struct ScanContext {
  DiabaticModel model;
  bo::AdiabaticSurfaces surfaces;
  std::vector<exact::ChannelSpec> channels;
  int focus = 3;
};

ScanContext make_context(const ScanSettings& st) {
  ScanContext c{models::dual_crossing(st.model_params), {}, {}, 3};
  c.surfaces = bo::build(c.model, st.grid);
  c.channels = st.channels.empty() ? default_scan_channels(st.grid) : st.channels;
  c.focus = st.focus_channel >= 0 ? st.focus_channel : 3;
  if (static_cast<std::size_t>(c.focus) >= c.channels.size())
    throw std::invalid_argument("scan: focus channel out of range");
  return c;
}

double final_time(const ScanSettings& st, double mass, double k) { return st.travel * mass / k; }

VibronicWavefunction initial_packet(const ScanSettings& st, const ScanContext& c, double k) {
  exact::PacketSpec ps;
  ps.x0 = st.x0;
  ps.k0 = k;
  ps.sigma = st.sigma;
  ps.state = 0;
  return bo::to_diabatic(exact::gaussian_packet(st.grid, c.model.n_states(), ps, Representation::adiabatic),
                         c.surfaces);
}

std::vector<double> outcome_vector(const exact::ChannelOutcome& o) { return o.probabilities; }

}  // namespace

ScanResult stueckelberg_scan(const std::vector<double>& k_values, const std::vector<std::string>& schemes,
                             const ScanSettings& st) {
  if (k_values.empty()) throw std::invalid_argument("stueckelberg_scan: no momentum values");
  for (std::size_t i = 1; i < k_values.size(); ++i)
    if (!(k_values[i] > k_values[i - 1])) throw std::invalid_argument("stueckelberg_scan: k values must increase");
  const ScanContext ctx = make_context(st);
  const double mass = ctx.model.mass();
  ScanResult scan;
  scan.values = k_values;
  scan.focus_channel = ctx.focus;
  for (const auto& ch : ctx.channels) scan.channel_names.push_back(ch.name);
  const std::size_t nch = ctx.channels.size();

  for (const auto& scheme : schemes) {
    SchemeCurve curve;
    curve.scheme = scheme;
    curve.probabilities.assign(k_values.size(), std::vector<double>(nch, 0.0));
    curve.std_error.assign(k_values.size(), 0.0);
    curve.ok.assign(k_values.size(), 1);
    curve.notes.assign(k_values.size(), "");
    for (std::size_t i = 0; i < k_values.size(); ++i) {
      const double k = k_values[i];
      const double tf = final_time(st, mass, k);
      try {
        if (scheme == "exact") {
          exact::PropagateOptions po;
          po.dt = st.exact_dt;
          po.n_steps = static_cast<std::size_t>(std::ceil(tf / st.exact_dt));
          const auto run = exact::propagate(initial_packet(st, ctx, k), ctx.model, po);
          const auto out = exact::scattering_outcomes(bo::to_adiabatic(run.final, ctx.surfaces), ctx.channels);
          curve.probabilities[i] = outcome_vector(out);
          if (!run.gates.passed()) {
            curve.ok[i] = 0;
            curve.notes[i] = run.gates.messages.empty() ? "gate failure" : run.gates.messages.front();
          }
        } else if (scheme == "fssh") {
          mqc::FsshOptions fo;
          fo.n_traj = st.fssh_traj;
          fo.sampling = {st.x0, k, st.sigma};
          fo.dt = st.traj_dt;
          fo.n_steps = static_cast<std::size_t>(std::ceil(tf / st.traj_dt));
          fo.seed = st.seed;
          fo.x_lo = st.grid.x_min;
          fo.x_hi = st.grid.x_max;
          fo.channels = ctx.channels;
          const auto r = mqc::fssh_run(ctx.model, fo);
          curve.probabilities[i] = r.channels.probabilities;
          curve.std_error[i] = r.channels.std_error[static_cast<std::size_t>(ctx.focus)];
          if (r.max_energy_error > 1e-6) {
            curve.ok[i] = 0;
            curve.notes[i] = "energy drift";
          }
        } else if (scheme == "hybrid-coherent" || scheme == "hybrid-incoherent") {
          mqc::HybridOptions ho;
          ho.dt = st.traj_dt;
          ho.t_max = tf;
          ho.x_lo = st.grid.x_min;
          ho.x_hi = st.grid.x_max;
          ho.coherent = scheme == "hybrid-coherent";
          ho.sigma = st.sigma;
          ho.merge_dt = st.merge_dt;
          ho.merge_dx = st.merge_dx;
          ho.merge_require_same_surface = st.merge_require_same_surface;
          ho.channels = ctx.channels;
          const auto r = mqc::hybrid_run({st.x0, k, 0}, ctx.model, ctx.surfaces, ho);
          curve.probabilities[i] = r.channels.probabilities;
          if (r.low_fidelity) {
            curve.ok[i] = 0;
            curve.notes[i] = "low fidelity";
          }
        } else if (scheme == "mixture") {
          mqc::MixtureOptions mo;
          mo.n_traj_per_branch = st.mixture_traj;
          mo.sampling = {st.x0, k, st.sigma};
          mo.dt = st.traj_dt;
          mo.n_steps = static_cast<std::size_t>(std::ceil(tf / st.traj_dt));
          mo.seed = st.seed;
          mo.x_lo = st.grid.x_min;
          mo.x_hi = st.grid.x_max;
          mo.channels = ctx.channels;
          const auto r = mqc::classical_mixture_run(ctx.model, mo);
          curve.probabilities[i] = r.channels.probabilities;
          curve.std_error[i] = r.channels.std_error[static_cast<std::size_t>(ctx.focus)];
        } else {
          throw std::invalid_argument("unknown scan scheme '" + scheme + "'");
        }
      } catch (const std::invalid_argument&) {
        throw;
      } catch (const std::exception& e) {
        curve.ok[i] = 0;
        curve.notes[i] = e.what();
      }
    }
    scan.curves.push_back(std::move(curve));
  }
  analyze_scan(scan);
  return scan;
}

bool single_branch(const VibronicWavefunction& adiabatic, double floor) {
  int occupied = 0;
  for (int n = 0; n < adiabatic.n_states; ++n)
    if (adiabatic.weight(n) > floor) ++occupied;
  return occupied <= 1;
}

ReinterferenceReport reinterference_witness(const WitnessSettings& ws) {
  const ScanSettings& st = ws.scan;
  const ScanContext ctx = make_context(st);
  const double mass = ctx.model.mass();
  ReinterferenceReport rep;
  const auto windows = bo::windows_from_mask(
      bo::coupling_free_mask(ctx.surfaces, bo::default_mask_threshold(ctx.surfaces)), st.grid, 0.5);
  if (windows.size() < 2) {
    rep.reason = "fewer than two coupling windows";
    return rep;
  }
  const double tf = final_time(st, mass, ws.k0);

  struct Sample {
    double time;
    std::vector<double> window_density;
    std::vector<double> weights;
    double overlap;
  };
  std::vector<Sample> samples;
  exact::PropagateOptions po;
  po.dt = st.exact_dt;
  po.n_steps = static_cast<std::size_t>(std::ceil(tf / st.exact_dt));
  po.stride = ws.stride;
  po.observer = [&](const exact::Snapshot& snap) {
    const VibronicWavefunction ad = bo::to_adiabatic(snap.psi, ctx.surfaces);
    Sample s;
    s.time = snap.psi.time;
    const double dx = st.grid.dx();
    for (const auto& w : windows) {
      double d = 0.0;
      for (int n = 0; n < ad.n_states; ++n)
        for (std::size_t i = w.i_lo; i <= w.i_hi; ++i) d += std::norm(ad.at(n, i));
      s.window_density.push_back(d * dx);
    }
    s.weights = ad.weights();
    s.overlap = exact::branch_overlap(ad, 0, 1);
    samples.push_back(std::move(s));
  };
  const auto ref = exact::propagate(initial_packet(st, ctx, ws.k0), ctx.model, po);
  const auto ref_out = exact::scattering_outcomes(bo::to_adiabatic(ref.final, ctx.surfaces), ctx.channels);
  rep.p_reference = ref_out.probabilities[static_cast<std::size_t>(ctx.focus)];

  // t2: first sample after the first window has been visited with every window empty
  std::size_t i2 = samples.size(), i3 = samples.size();
  bool visited = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.window_density[0] >= ws.window_tol) visited = true;
    const bool empty = std::all_of(s.window_density.begin(), s.window_density.end(),
                                   [&](double d) { return d < ws.window_tol; });
    if (visited && empty) {
      i2 = i;
      break;
    }
  }
  if (i2 == samples.size()) {
    rep.reason = "no coupling-free interval between the windows";
    return rep;
  }
  for (std::size_t i = i2; i < samples.size(); ++i) {
    if (samples[i].window_density[1] >= ws.window_tol) break;
    i3 = i;
  }
  const auto& s2 = samples[i2];
  const auto& s3 = samples[i3];
  rep.t2 = s2.time;
  rep.t3 = s3.time;
  for (std::size_t n = 0; n < s2.weights.size(); ++n) {
    rep.c_abs_t2.push_back(std::sqrt(s2.weights[n]));
    rep.c_abs_t3.push_back(std::sqrt(s3.weights[n]));
    rep.amplitude_drift = std::max(rep.amplitude_drift, std::abs(rep.c_abs_t3[n] - rep.c_abs_t2[n]));
  }
  rep.overlap_at_entry = s3.overlap;
  if (*std::min_element(s2.weights.begin(), s2.weights.end()) <= exact::kEmptyBranch) {
    rep.reason = "single-branch input";
    return rep;
  }
  if (rep.overlap_at_entry <= 0.01) {
    rep.reason = "branch overlap at second window entry below 0.01";
    return rep;
  }

  // Paired run: same dt, split at t2, phase on the upper branch.
  exact::PropagateOptions p1;
  p1.dt = ref.gates.dt;
  p1.validate_dt = false;
  p1.n_steps = static_cast<std::size_t>(std::llround(rep.t2 / ref.gates.dt));
  const auto first = exact::propagate(initial_packet(st, ctx, ws.k0), ctx.model, p1);
  VibronicWavefunction ad = bo::to_adiabatic(first.final, ctx.surfaces);
  const cd ph = std::polar(1.0, ws.phase);
  cd* up = ad.state(1);
  for (std::size_t i = 0; i < ad.n_points(); ++i) up[i] *= ph;
  exact::PropagateOptions p2 = p1;
  const std::size_t total_steps = static_cast<std::size_t>(std::llround(ref.final.time / ref.gates.dt));
  p2.n_steps = total_steps > p1.n_steps ? total_steps - p1.n_steps : 0;
  const auto second = exact::propagate(bo::to_diabatic(ad, ctx.surfaces), ctx.model, p2);
  const auto out = exact::scattering_outcomes(bo::to_adiabatic(second.final, ctx.surfaces), ctx.channels);
  rep.p_shifted = out.probabilities[static_cast<std::size_t>(ctx.focus)];
  rep.delta = std::abs(rep.p_shifted - rep.p_reference);
  rep.applicable = true;
  return rep;
}

}  // namespace vibro::diag

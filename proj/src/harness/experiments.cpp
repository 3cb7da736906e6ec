#include "vibrolab/harness/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "vibrolab/composite.hpp"
#include "vibrolab/diagnostics.hpp"
#include "vibrolab/exact.hpp"
#include "vibrolab/mqc.hpp"
#include "vibrolab/surfaces.hpp"

#ifndef VIBROLAB_VERSION
#define VIBROLAB_VERSION "dev"
#endif

namespace vibro::harness {

namespace fs = std::filesystem;

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> c{
      {"pointer-demo", "finite-dimensional pointer evolution: pure vs mixture diagonals in the pointer and a rotated frame"},
      {"exact", "split-operator propagation with branch-resolved observables and gates"},
      {"ehrenfest", "single mean-field trajectory with diabatic amplitudes"},
      {"fssh", "fewest-switches surface hopping ensemble"},
      {"mixture", "classical mixture of single-surface ensembles, optionally in a rotated basis"},
      {"hybrid", "branching-window hybrid with phase tracking and coherent merges"},
      {"scan", "parameter sweep over one or more schemes with oscillation metrics"},
      {"compare", "comparison report over existing run directories"},
  };
  return c;
}

fs::path output_root(const RunConfig& cfg) {
  if (const char* env = std::getenv(kOutputRootEnv); env != nullptr && *env != '\0') return fs::path(env);
  return fs::path(cfg.output);
}

namespace {

using Clock = std::chrono::steady_clock;

std::string fmt2(std::size_t i) {
  char b[16];
  std::snprintf(b, sizeof b, "%02zu", i);
  return b;
}

json grid_json(const SpatialGrid& g) { return {{"x_min", g.x_min}, {"x_max", g.x_max}, {"n_points", g.n_points}}; }

json gates_json(const exact::GateReport& g) {
  return {{"passed", g.passed()},
          {"requested_dt", g.requested_dt},
          {"dt", g.dt},
          {"halvings", g.halvings},
          {"norm_drift", g.norm_drift},
          {"max_step_norm_drift", g.max_step_norm_drift},
          {"energy_drift", g.energy_drift},
          {"dt_gate_passed", g.dt_gate_passed},
          {"norm_gate_passed", g.norm_gate_passed},
          {"energy_gate_passed", g.energy_gate_passed},
          {"boundary_warning", g.boundary_warning},
          {"messages", g.messages}};
}

json channels_json(const std::vector<std::string>& names, const std::vector<double>& p,
                   const std::vector<double>& se, double unassigned) {
  json j{{"names", names}, {"probabilities", p}, {"unassigned", unassigned}};
  if (!se.empty()) j["std_error"] = se;
  return j;
}

std::vector<std::string> rho_header(int n) {
  std::vector<std::string> h;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      h.push_back("rho_" + std::to_string(i) + std::to_string(j) + "_re");
      if (i != j) h.push_back("rho_" + std::to_string(i) + std::to_string(j) + "_im");
    }
  return h;
}

void append_rho(std::vector<double>& row, const Eigen::MatrixXcd& rho) {
  const auto n = rho.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      row.push_back(rho(i, j).real());
      if (i != j) row.push_back(rho(i, j).imag());
    }
}

std::vector<std::pair<double, Eigen::MatrixXcd>> read_rho_series(const fs::path& csv) {
  const CsvData d = read_csv(csv);
  const auto t = d.numbers("t");
  int n = 0;
  while (d.column("rho_" + std::to_string(n) + std::to_string(n) + "_re") >= 0) ++n;
  if (n == 0) throw ConfigError({"compare: " + csv.string() + " has no electronic density columns"});
  std::vector<std::pair<double, Eigen::MatrixXcd>> out(t.size());
  for (std::size_t r = 0; r < t.size(); ++r) out[r] = {t[r], Eigen::MatrixXcd::Zero(n, n)};
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      const std::string base = "rho_" + std::to_string(i) + std::to_string(j);
      const auto re = d.numbers(base + "_re");
      const auto im = i != j ? d.numbers(base + "_im") : std::vector<double>(t.size(), 0.0);
      for (std::size_t r = 0; r < t.size(); ++r) {
        out[r].second(i, j) = cd(re[r], im[r]);
        out[r].second(j, i) = cd(re[r], -im[r]);
      }
    }
  return out;
}

// Common summary header; no paths or clocks so digests are reproducible.
json base_summary(const RunConfig& cfg) {
  return {{"experiment", cfg.experiment},
          {"name", cfg.name},
          {"seed", cfg.seed},
          {"model", cfg.model},
          {"model_params", cfg.model_params},
          {"grid", grid_json(cfg.grid)},
          {"horizon", cfg.horizon()},
          {"code_version", VIBROLAB_VERSION}};
}

void finalize(const fs::path& dir, const RunConfig& cfg, RunOutcome& out, const json& gates, Clock::time_point t0) {
  out.summary["exit_code"] = out.exit_code;
  write_text(dir / kSummaryFile, dump_json(out.summary));
  write_text(dir / kConfigEcho, echo_config(cfg));
  json m{{"experiment", cfg.experiment},
         {"name", cfg.name},
         {"seed", cfg.seed},
         {"code_version", VIBROLAB_VERSION},
         {"config_echo", echo_config(cfg)},
         {"gates", gates},
         {"exit_code", out.exit_code},
         {"files", file_inventory(dir)},
         {"wall_clock_seconds", std::chrono::duration<double>(Clock::now() - t0).count()}};
  write_text(dir / kManifestFile, dump_json(m));
  out.dir = dir;
}

std::size_t traj_steps(const RunConfig& cfg) {
  return static_cast<std::size_t>(std::llround(cfg.horizon() / cfg.scheme_dt()));
}

std::size_t traj_stride(const RunConfig& cfg) {
  if (cfg.stride == 0) return 0;
  const double r = static_cast<double>(cfg.stride) * cfg.dt / cfg.scheme_dt();
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(r)));
}

std::vector<double> adiabatic_amplitudes_or_state(const RunConfig& cfg, int n, std::vector<cd>& amps) {
  amps = cfg.packet_spec().amplitudes;
  if (amps.empty()) {
    amps.assign(static_cast<std::size_t>(n), cd(0.0, 0.0));
    amps[static_cast<std::size_t>(cfg.packet.state)] = 1.0;
  }
  std::vector<double> w;
  for (const auto& a : amps) w.push_back(std::norm(a));
  return w;
}

// ---------------------------------------------------------------------------

json run_pointer_demo(const RunConfig& cfg, const fs::path& dir, RunOutcome& out) {
  using namespace composite;
  const auto& p = cfg.pointer;
  const CMatrix frame = random_unitary(p.dim_a, p.unitary_seed);
  std::vector<CMatrix> envs;
  for (int n = 0; n < p.dim_a; ++n) envs.push_back(random_unitary(p.dim_e, p.unitary_seed + 1 + static_cast<std::uint64_t>(n)));
  const PointerEvolution evo = synthesize_pointer_evolution(frame, envs);
  CMatrix g = CMatrix::Identity(p.dim_a, p.dim_a);
  g.topLeftCorner(2, 2) = rotation(p.rotation);
  const CMatrix rotated = frame * g;
  CVector c(p.dim_a);
  const auto amps = cfg.complex_amplitudes();
  if (static_cast<int>(amps.size()) == p.dim_a) {
    for (int i = 0; i < p.dim_a; ++i) c(i) = amps[static_cast<std::size_t>(i)];
    c /= c.norm();
  } else {
    c.setConstant(1.0 / std::sqrt(static_cast<double>(p.dim_a)));
  }
  CVector env = CVector::Constant(p.dim_e, 1.0 / std::sqrt(static_cast<double>(p.dim_e)));
  const int steps = static_cast<int>(p.steps);
  // amplitudes are given in the frame of each mixture
  const auto rp = compare_diagonal_dynamics(compose(frame * c, env), FrameSet(frame), evo.total, steps);
  const auto rr = compare_diagonal_dynamics(compose(rotated * c, env), FrameSet(rotated), evo.total, steps);
  CsvTable t({"step", "pointer_resolved", "pointer_traced", "rotated_resolved", "rotated_traced"});
  for (std::size_t k = 0; k < rp.per_step.size(); ++k)
    t.add({static_cast<double>(k), rp.per_step[k], rp.per_step_traced[k], rr.per_step[k], rr.per_step_traced[k]});
  write_text(dir / kSeriesFile, t.str());
  out.summary["pointer"] = {{"dim_a", p.dim_a},
                            {"dim_e", p.dim_e},
                            {"steps", p.steps},
                            {"rotation", p.rotation},
                            {"unitarity_error", unitarity_error(evo.total)},
                            {"pointer_max_deviation", rp.max_abs_deviation},
                            {"pointer_max_traced_deviation", rp.max_traced_deviation},
                            {"rotated_max_deviation", rr.max_abs_deviation},
                            {"rotated_max_traced_deviation", rr.max_traced_deviation}};
  return json{{"passed", true}};
}

json run_exact(const RunConfig& cfg, const fs::path& dir, RunOutcome& out) {
  const DiabaticModel model = models::make(cfg.model, cfg.model_params);
  const bo::AdiabaticSurfaces s = bo::build(model, cfg.grid);
  const auto psi0 =
      bo::to_diabatic(exact::gaussian_packet(cfg.grid, model.n_states(), cfg.packet_spec(), Representation::adiabatic), s);
  exact::PropagateOptions po;
  po.dt = cfg.dt;
  po.n_steps = cfg.n_steps;
  po.stride = cfg.stride;
  po.surfaces = &s;
  po.propagator.absorb_width = cfg.absorb_width;
  const auto r = exact::propagate(psi0, model, po);
  const int n = model.n_states();
  std::vector<std::string> h{"t", "norm", "energy", "entropy"};
  for (int k = 0; k < n; ++k) h.push_back("w_" + std::to_string(k));
  for (int k = 0; k < n; ++k) h.push_back("x_" + std::to_string(k));
  for (int k = 0; k < n; ++k) h.push_back("p_" + std::to_string(k));
  for (int k = 0; k < n; ++k) h.push_back("e_" + std::to_string(k));
  for (const auto& c : rho_header(n)) h.push_back(c);
  CsvTable t(h);
  for (const auto& o : r.series) {
    std::vector<double> row{o.time, o.norm, o.energy, o.entropy};
    for (double v : o.weights) row.push_back(v);
    for (double v : o.x_mean) row.push_back(v);
    for (double v : o.p_mean) row.push_back(v);
    for (double v : o.branch_energy) row.push_back(v);
    append_rho(row, o.rho_el);
    t.add(row);
  }
  write_text(dir / kSeriesFile, t.str());
  const auto& last = r.series.back();
  const VibronicWavefunction ad = bo::to_adiabatic(r.final, s);
  const diag::EntanglementReport ent = diag::entanglement_from_density(exact::electronic_density(ad));
  out.summary["final"] = {{"time", last.time},
                          {"norm", last.norm},
                          {"energy", last.energy},
                          {"weights", last.weights},
                          {"x_mean", last.x_mean},
                          {"p_mean", last.p_mean},
                          {"entropy", ent.entropy},
                          {"schmidt_coefficients", ent.schmidt_coefficients},
                          {"rank", ent.rank_eps}};
  json gates = gates_json(r.gates);
  if (!r.gates.passed()) {
    out.exit_code = kExitGate;
    for (const auto& m : r.gates.messages) out.messages.push_back(m);
  }
  if (!cfg.channels.empty()) {
    try {
      const auto oc = exact::scattering_outcomes(ad, cfg.channels);
      out.summary["channels"] = channels_json(oc.names, oc.probabilities, {}, oc.unassigned);
      out.summary["channels"]["raw"] = oc.raw;
    } catch (const std::exception& e) {
      out.exit_code = kExitGate;
      out.messages.push_back(e.what());
      gates["channel_error"] = e.what();
      gates["passed"] = false;
    }
  }
  out.summary["gates"] = gates;
  return gates;
}

json run_ehrenfest(const RunConfig& cfg, const fs::path& dir, RunOutcome& out) {
  const DiabaticModel model = models::make(cfg.model, cfg.model_params);
  const int n = model.n_states();
  std::vector<cd> amps;
  adiabatic_amplitudes_or_state(cfg, n, amps);
  const mqc::LocalElectronic el(model);
  const mqc::ElectronicPoint pt = el.at(cfg.packet.x0);
  mqc::SmallCVec ca(n);
  for (int k = 0; k < n; ++k) ca(k) = amps[static_cast<std::size_t>(k)];
  const mqc::SmallCVec cd0 = pt.frame.cast<cd>() * ca;
  mqc::EhrenfestOptions eo;
  eo.dt = cfg.scheme_dt();
  eo.n_steps = traj_steps(cfg);
  eo.stride = traj_stride(cfg);
  eo.energy_gate = cfg.scheme.energy_gate;
  eo.x_lo = cfg.grid.x_min;
  eo.x_hi = cfg.grid.x_max;
  const auto r = mqc::ehrenfest_run(cfg.packet.x0, cfg.packet.k0, cd0, model, eo);
  std::vector<std::string> h{"t", "x", "p", "energy"};
  for (int k = 0; k < n; ++k) h.push_back("pop_" + std::to_string(k));
  CsvTable t(h);
  for (const auto& s : r.series) {
    std::vector<double> row{s.time, s.x, s.p, s.energy};
    for (double v : s.populations) row.push_back(v);
    t.add(row);
  }
  write_text(dir / kSeriesFile, t.str());
  const auto& last = r.series.back();
  out.summary["final"] = {{"time", last.time},
                          {"x", last.x},
                          {"p", last.p},
                          {"populations", last.populations},
                          {"entropy", r.entanglement_entropy()},
                          {"trajectories", 1}};
  json gates{{"passed", !r.aborted}, {"max_energy_error", r.max_energy_error}, {"diagnostic", r.diagnostic}};
  out.summary["gates"] = gates;
  if (r.aborted) {
    out.exit_code = kExitGate;
    out.messages.push_back(r.diagnostic);
  }
  return gates;
}

void write_ensemble(const mqc::EnsembleResult& r, const fs::path& dir, int n) {
  std::vector<std::string> h{"t"};
  for (int k = 0; k < n; ++k) h.push_back("frac_" + std::to_string(k));
  for (const auto& c : rho_header(n)) h.push_back(c);
  CsvTable t(h);
  for (const auto& s : r.series) {
    std::vector<double> row{s.time};
    for (double v : s.surface_fraction) row.push_back(v);
    append_rho(row, s.rho_el);
    t.add(row);
  }
  write_text(dir / kSeriesFile, t.str());
  CsvTable tr({"index", "x", "p", "active", "weight"});
  for (std::size_t i = 0; i < r.trajectories.size(); ++i) {
    const auto& q = r.trajectories[i];
    tr.add({static_cast<double>(i), q.x, q.p, static_cast<double>(q.active), q.weight});
  }
  write_text(dir / "trajectories.csv", tr.str());
}

json run_fssh(const RunConfig& cfg, const fs::path& dir, RunOutcome& out) {
  const DiabaticModel model = models::make(cfg.model, cfg.model_params);
  mqc::FsshOptions fo;
  fo.n_traj = cfg.scheme.n_traj;
  fo.sampling = {cfg.packet.x0, cfg.packet.k0, cfg.packet.sigma};
  fo.initial_surface = cfg.packet.state;
  fo.dt = cfg.scheme_dt();
  fo.n_steps = traj_steps(cfg);
  fo.stride = traj_stride(cfg);
  fo.seed = cfg.seed;
  fo.x_lo = cfg.grid.x_min;
  fo.x_hi = cfg.grid.x_max;
  fo.channels = cfg.channels;
  fo.frustrated = cfg.scheme.frustrated == "reverse" ? mqc::FrustratedPolicy::reverse : mqc::FrustratedPolicy::reject;
  const auto r = mqc::fssh_run(model, fo);
  write_ensemble(r, dir, model.n_states());
  out.summary["channels"] =
      channels_json(r.channels.names, r.channels.probabilities, r.channels.std_error, r.channels.unassigned);
  out.summary["statistics"] = {{"n_samples", fo.n_traj},
                               {"hops", r.hops},
                               {"frustrated", r.frustrated},
                               {"frustrated_fraction", r.frustrated_fraction},
                               {"warnings", r.warnings}};
  if (!r.series.empty()) out.summary["final"] = {{"surface_fraction", r.series.back().surface_fraction}};
  const bool ok = r.max_energy_error <= cfg.scheme.energy_gate;
  json gates{{"passed", ok}, {"max_energy_error", r.max_energy_error}, {"energy_gate", cfg.scheme.energy_gate}};
  out.summary["gates"] = gates;
  if (!ok) {
    out.exit_code = kExitGate;
    out.messages.push_back("energy drift between hops exceeds the gate; reduce scheme.dt");
  }
  for (const auto& w : r.warnings) out.messages.push_back(w);
  return gates;
}

json run_mixture(const RunConfig& cfg, const fs::path& dir, RunOutcome& out) {
  const DiabaticModel model = models::make(cfg.model, cfg.model_params);
  mqc::MixtureOptions mo;
  adiabatic_amplitudes_or_state(cfg, model.n_states(), mo.amplitudes);
  mo.basis_rotation = cfg.scheme.basis_rotation;
  mo.n_traj_per_branch = cfg.scheme.n_traj;
  mo.sampling = {cfg.packet.x0, cfg.packet.k0, cfg.packet.sigma};
  mo.dt = cfg.scheme_dt();
  mo.n_steps = traj_steps(cfg);
  mo.stride = traj_stride(cfg);
  mo.seed = cfg.seed;
  mo.x_lo = cfg.grid.x_min;
  mo.x_hi = cfg.grid.x_max;
  mo.channels = cfg.channels;
  const auto r = mqc::classical_mixture_run(model, mo);
  write_ensemble(r, dir, model.n_states());
  out.summary["channels"] =
      channels_json(r.channels.names, r.channels.probabilities, r.channels.std_error, r.channels.unassigned);
  out.summary["statistics"] = {{"n_samples", mo.n_traj_per_branch}, {"scheme", r.scheme}};
  const bool ok = r.max_energy_error <= cfg.scheme.energy_gate;
  json gates{{"passed", ok}, {"max_energy_error", r.max_energy_error}, {"energy_gate", cfg.scheme.energy_gate}};
  out.summary["gates"] = gates;
  if (!ok) {
    out.exit_code = kExitGate;
    out.messages.push_back("energy drift exceeds the gate; reduce scheme.dt");
  }
  return gates;
}

const char* status_name(mqc::BranchStatus s) {
  switch (s) {
    case mqc::BranchStatus::free: return "free";
    case mqc::BranchStatus::parked: return "parked";
    case mqc::BranchStatus::consumed: return "consumed";
    case mqc::BranchStatus::finished: return "finished";
    case mqc::BranchStatus::pruned: return "pruned";
    case mqc::BranchStatus::closed: return "closed";
  }
  return "?";
}

json run_hybrid(const RunConfig& cfg, const fs::path& dir, RunOutcome& out) {
  const DiabaticModel model = models::make(cfg.model, cfg.model_params);
  const bo::AdiabaticSurfaces s = bo::build(model, cfg.grid);
  mqc::HybridOptions ho;
  ho.dt = cfg.scheme_dt();
  ho.t_max = cfg.horizon();
  ho.x_lo = cfg.grid.x_min;
  ho.x_hi = cfg.grid.x_max;
  ho.mask_threshold = cfg.scheme.mask_threshold;
  ho.window_margin = cfg.scheme.window_margin;
  ho.amplitude_floor = cfg.scheme.amplitude_floor;
  ho.coherent = cfg.scheme.coherent;
  ho.sigma = cfg.packet.sigma;
  ho.merge_dt = cfg.scheme.merge_dt;
  ho.merge_dx = cfg.scheme.merge_dx;
  ho.merge_require_same_surface = cfg.scheme.merge_same_surface;
  ho.branch_cap = cfg.scheme.branch_cap;
  ho.prune_budget = cfg.scheme.prune_budget;
  ho.channels = cfg.channels;
  const auto r = mqc::hybrid_run({cfg.packet.x0, cfg.packet.k0, cfg.packet.state}, model, s, ho);
  CsvTable t({"id", "parent", "surface", "status", "window", "x", "p", "time", "weight", "phase"});
  for (const auto& b : r.branches)
    t.add_cells({std::to_string(b.id), std::to_string(b.parent), std::to_string(b.surface), status_name(b.status),
                 std::to_string(b.window), fmt17(b.x), fmt17(b.p), fmt17(b.time), fmt17(b.weight), fmt17(b.phase)});
  write_text(dir / "branches.csv", t.str());
  json windows = json::array();
  for (const auto& w : r.windows) windows.push_back({w.x_lo, w.x_hi});
  out.summary["channels"] = channels_json(r.channels.names, r.channels.probabilities, {}, r.channels.unassigned);
  out.summary["tree"] = {{"branches", r.branches.size()},
                         {"leaves", r.leaves.size()},
                         {"windows", windows},
                         {"window_passes", r.window_passes},
                         {"merges", r.merges},
                         {"closed_weight", r.closed_weight},
                         {"pruned_weight", r.pruned_weight},
                         {"coherent", cfg.scheme.coherent},
                         {"log", r.log}};
  json gates{{"passed", !r.low_fidelity}, {"low_fidelity", r.low_fidelity}};
  out.summary["gates"] = gates;
  if (r.low_fidelity) {
    out.exit_code = kExitGate;
    out.messages.push_back("hybrid run flagged low fidelity (pruning budget or event limit)");
  }
  return gates;
}

RunOutcome run_single(const RunConfig& cfg, const fs::path& dir);

json run_scan(const RunConfig& cfg, const fs::path& dir, RunOutcome& out) {
  const std::vector<exact::ChannelSpec> channels =
      cfg.channels.empty() ? diag::default_scan_channels(cfg.grid) : cfg.channels;
  int focus = static_cast<int>(channels.size()) - 1;
  for (std::size_t i = 0; i < channels.size(); ++i)
    if (channels[i].name == cfg.scan.focus) focus = static_cast<int>(i);
  diag::ScanResult scan;
  scan.parameter = cfg.scan.parameter;
  scan.values = cfg.scan.values;
  scan.focus_channel = focus;
  for (const auto& c : channels) scan.channel_names.push_back(c.name);
  std::vector<std::string> head{"value", "scheme", "ok"};
  for (const auto& c : channels) head.push_back(c.name);
  head.push_back("focus_std_error");
  CsvTable table(head);
  bool any_failed = false;
  for (const auto& scheme : cfg.scan.schemes) {
    diag::SchemeCurve curve;
    curve.scheme = scheme;
    for (std::size_t i = 0; i < cfg.scan.values.size(); ++i) {
      const double v = cfg.scan.values[i];
      RunConfig pc = cfg;
      pc.experiment = scheme.rfind("hybrid", 0) == 0 ? "hybrid" : scheme;
      pc.scheme.coherent = scheme != "hybrid-incoherent";
      pc.name = fmt2(i) + "_" + scheme;
      pc.channels = channels;
      if (cfg.scan.parameter == "k0") {
        pc.packet.k0 = v;
        if (cfg.scan.scale_horizon)
          pc.n_steps = static_cast<std::size_t>(std::llround(static_cast<double>(cfg.n_steps) * cfg.scan.values[0] / v));
      } else if (cfg.scan.parameter == "x0") {
        pc.packet.x0 = v;
      } else if (cfg.scan.parameter == "sigma") {
        pc.packet.sigma = v;
      } else {
        pc.model_params[cfg.scan.parameter.substr(6)] = v;
      }
      std::vector<double> probs(channels.size(), std::nan(""));
      double se = 0.0;
      bool ok = false;
      std::string note;
      try {
        validate(pc);
        const RunOutcome po = run_single(pc, dir / "points" / pc.name);
        ok = po.exit_code == kExitOk;
        if (!ok && !po.messages.empty()) note = po.messages.front();
        if (po.summary.contains("channels")) {
          probs = po.summary["channels"]["probabilities"].get<std::vector<double>>();
          if (po.summary["channels"].contains("std_error"))
            se = po.summary["channels"]["std_error"][static_cast<std::size_t>(focus)].get<double>();
        } else {
          ok = false;
        }
      } catch (const ConfigError& e) {
        note = e.what();
      } catch (const std::exception& e) {
        note = e.what();
      }
      if (!ok) any_failed = true;
      curve.probabilities.push_back(probs);
      curve.std_error.push_back(se);
      curve.ok.push_back(ok ? 1 : 0);
      curve.notes.push_back(note);
      std::vector<std::string> cells{fmt17(v), scheme, ok ? "1" : "0"};
      for (double p : probs) cells.push_back(ok ? fmt17(p) : "nan");
      cells.push_back(fmt17(se));
      table.add_cells(cells);
    }
    scan.curves.push_back(std::move(curve));
  }
  diag::analyze_scan(scan);
  write_text(dir / "scan.csv", table.str());
  json curves = json::array();
  for (const auto& c : scan.curves) {
    std::vector<std::string> notes;
    for (std::size_t i = 0; i < c.notes.size(); ++i)
      if (!c.ok[i]) notes.push_back(fmt17(scan.values[i]) + ": " + c.notes[i]);
    json focus_curve = json::array();
    for (std::size_t i = 0; i < c.probabilities.size(); ++i)
      focus_curve.push_back(c.ok[i] ? json(c.probabilities[i][static_cast<std::size_t>(focus)]) : json(nullptr));
    curves.push_back({{"scheme", c.scheme},
                      {"focus", focus_curve},
                      {"extrema", c.metrics.extrema},
                      {"amplitude", c.metrics.amplitude},
                      {"noise", c.noise},
                      {"correlation_vs_exact", c.correlation},
                      {"failed_points", notes}});
  }
  out.summary["scan"] = {{"parameter", scan.parameter},
                         {"values", scan.values},
                         {"channels", scan.channel_names},
                         {"focus_channel", scan.channel_names[static_cast<std::size_t>(focus)]},
                         {"curves", curves}};
  json gates{{"passed", !any_failed}};
  out.summary["gates"] = gates;
  if (any_failed) {
    out.exit_code = kExitGate;
    out.messages.push_back("one or more scan points failed; gaps are marked in scan.csv");
  }
  return gates;
}

json run_compare_experiment(const RunConfig& cfg, const fs::path& dir, RunOutcome& out) {
  std::vector<fs::path> paths(cfg.compare.artifacts.begin(), cfg.compare.artifacts.end());
  const json report = compare(paths, {cfg.compare.kind, cfg.compare.angle});
  write_text(dir / "compare.json", dump_json(report));
  out.summary["compare"] = report;
  return json{{"passed", true}};
}

RunOutcome run_single(const RunConfig& cfg, const fs::path& dir) {
  const auto t0 = Clock::now();
  fs::create_directories(dir);
  RunOutcome out;
  out.summary = base_summary(cfg);
  json gates;
  const auto& k = cfg.experiment;
  if (k == "pointer-demo") gates = run_pointer_demo(cfg, dir, out);
  else if (k == "exact") gates = run_exact(cfg, dir, out);
  else if (k == "ehrenfest") gates = run_ehrenfest(cfg, dir, out);
  else if (k == "fssh") gates = run_fssh(cfg, dir, out);
  else if (k == "mixture") gates = run_mixture(cfg, dir, out);
  else if (k == "hybrid") gates = run_hybrid(cfg, dir, out);
  else if (k == "scan") gates = run_scan(cfg, dir, out);
  else if (k == "compare") gates = run_compare_experiment(cfg, dir, out);
  else throw ConfigError({"run.experiment: unknown kind '" + k + "'"});
  finalize(dir, cfg, out, gates, t0);
  return out;
}

json load_summary(const fs::path& artifact) {
  const fs::path p = fs::is_directory(artifact) ? artifact / kSummaryFile : artifact;
  if (!fs::exists(p)) throw ConfigError({"compare: no summary at " + p.string()});
  try {
    return read_json(p);
  } catch (const std::exception& e) {
    throw ConfigError({std::string("compare: ") + e.what()});
  }
}

fs::path artifact_dir(const fs::path& artifact) { return fs::is_directory(artifact) ? artifact : artifact.parent_path(); }

void require_same(const std::vector<json>& s, const char* key, const std::string& what) {
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i].value(key, json()) != s[0].value(key, json()))
      throw ConfigError({"compare: incompatible " + what + " between artifact 1 and artifact " + std::to_string(i + 1)});
}

}  // namespace

RunOutcome run(const RunConfig& cfg_in, const std::optional<fs::path>& dir) {
  validate(cfg_in);
  // Run from the canonical echo so a replay parses exactly the same values.
  const RunConfig cfg = parse_config(echo_config(cfg_in));
  const fs::path d = dir ? *dir : output_root(cfg) / cfg.name;
  return run_single(cfg, d);
}

json compare(const std::vector<fs::path>& artifacts, const CompareOptions& opts) {
  if (artifacts.size() < 2) throw ConfigError({"compare: need at least two artifacts"});
  const auto& kinds = compare_kinds();
  if (std::find(kinds.begin(), kinds.end(), opts.kind) == kinds.end())
    throw ConfigError({"compare: unknown kind '" + opts.kind + "'"});
  std::vector<json> s;
  for (const auto& a : artifacts) s.push_back(load_summary(a));
  json rep{{"kind", opts.kind}};
  json names = json::array();
  for (const auto& x : s) names.push_back(x.value("name", "") + ":" + x.value("experiment", ""));
  rep["artifacts"] = names;

  if (opts.kind == "channels") {
    require_same(s, "grid", "grids");
    require_same(s, "horizon", "horizons");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (!s[i].contains("channels"))
        throw ConfigError({"compare: artifact " + std::to_string(i + 1) + " has no channel statistics"});
    const auto ref_names = s[0]["channels"]["names"];
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i]["channels"]["names"] != ref_names) throw ConfigError({"compare: channel definitions differ"});
    json rows = json::array();
    double max_diff = 0.0;
    for (std::size_t c = 0; c < ref_names.size(); ++c) {
      json row{{"channel", ref_names[c]}};
      std::vector<double> p, d;
      for (const auto& x : s) p.push_back(x["channels"]["probabilities"][c].get<double>());
      for (std::size_t i = 1; i < p.size(); ++i) {
        d.push_back(std::abs(p[i] - p[0]));
        max_diff = std::max(max_diff, d.back());
      }
      row["probabilities"] = p;
      row["abs_difference"] = d;
      rows.push_back(row);
    }
    rep["table"] = rows;
    rep["max_abs_difference"] = max_diff;
  } else if (opts.kind == "diagonal") {
    require_same(s, "grid", "grids");
    require_same(s, "horizon", "horizons");
    const auto a = read_rho_series(artifact_dir(artifacts[0]) / kSeriesFile);
    const auto b = read_rho_series(artifact_dir(artifacts[1]) / kSeriesFile);
    if (a.size() != b.size()) throw ConfigError({"compare: time grids differ in length"});
    std::vector<exact::Observation> ex(a.size());
    std::vector<mqc::EnsembleSample> mx(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      ex[i].time = a[i].first;
      ex[i].rho_el = a[i].second;
      mx[i].time = b[i].first;
      mx[i].rho_el = b[i].second;
    }
    const auto n = a.front().second.rows();
    Eigen::MatrixXcd frame = Eigen::MatrixXcd::Identity(n, n);
    if (opts.angle != 0.0) {
      if (n != 2) throw ConfigError({"compare: frame rotation needs two states"});
      frame = composite::rotation(opts.angle);
    }
    double tol = 0.0;
    if (s[1].contains("statistics"))
      tol = 1.0 / std::sqrt(s[1]["statistics"]["n_samples"].get<double>());
    diag::DeviationSeries d;
    try {
      d = diag::diagonal_deviation_series(ex, mx, frame, tol);
    } catch (const std::invalid_argument& e) {
      throw ConfigError({std::string("compare: ") + e.what()});
    }
    rep["angle"] = opts.angle;
    rep["time"] = d.time;
    rep["deviation"] = d.deviation;
    rep["max_deviation"] = d.max_deviation;
    rep["tolerance"] = d.tolerance;
  } else if (opts.kind == "bimodality") {
    require_same(s, "grid", "grids");
    const json* ex = nullptr;
    const json* eh = nullptr;
    for (const auto& x : s) {
      if (x.value("experiment", "") == "exact") ex = &x;
      if (x.value("experiment", "") == "ehrenfest") eh = &x;
    }
    if (ex == nullptr || eh == nullptr) throw ConfigError({"compare: bimodality needs an exact and an ehrenfest run"});
    if (!ex->contains("channels")) throw ConfigError({"compare: exact run has no channel statistics"});
    int populated = 0;
    for (const auto& p : (*ex)["channels"]["probabilities"])
      if (p.get<double>() > 0.1) ++populated;
    rep["exact"] = {{"channels_above_0.1", populated},
                    {"probabilities", (*ex)["channels"]["probabilities"]},
                    {"entropy", (*ex)["final"]["entropy"]}};
    rep["ehrenfest"] = {{"trajectories", (*eh)["final"]["trajectories"]},
                        {"final_x", (*eh)["final"]["x"]},
                        {"single_valued", true},
                        {"entropy", (*eh)["final"]["entropy"]}};
    rep["bimodal_exact"] = populated >= 2;
  } else {
    json rows = json::array();
    for (const auto& x : s)
      if (!x.contains("scan")) throw ConfigError({"compare: curves needs scan artifacts"});
    for (std::size_t i = 1; i < s.size(); ++i)
      if (s[i]["scan"]["values"] != s[0]["scan"]["values"]) throw ConfigError({"compare: scan values differ"});
    auto focus_of = [](const json& sc, const std::string& scheme) {
      std::vector<double> v;
      for (const auto& c : sc["scan"]["curves"])
        if (c["scheme"] == scheme)
          for (const auto& f : c["focus"]) v.push_back(f.is_null() ? std::nan("") : f.get<double>());
      return v;
    };
    for (const auto& c : s[0]["scan"]["curves"]) {
      const std::string scheme = c["scheme"];
      const auto ref = focus_of(s[0], scheme);
      for (std::size_t i = 1; i < s.size(); ++i) {
        const auto other = focus_of(s[i], scheme);
        if (other.size() != ref.size()) continue;
        std::vector<double> a, b;
        double md = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k)
          if (!std::isnan(ref[k]) && !std::isnan(other[k])) {
            a.push_back(ref[k]);
            b.push_back(other[k]);
            md = std::max(md, std::abs(ref[k] - other[k]));
          }
        rows.push_back({{"scheme", scheme}, {"artifact", i + 1}, {"correlation", diag::pearson(a, b)},
                        {"max_abs_difference", md}});
      }
    }
    rep["curves"] = rows;
  }
  return rep;
}

ReplayReport replay(const fs::path& manifest, const std::optional<fs::path>& dir) {
  const json m = read_json(manifest);
  if (!m.contains("config_echo")) throw ConfigError({"replay: manifest has no config echo"});
  const RunConfig cfg = parse_config(m["config_echo"].get<std::string>());
  ReplayReport rep;
  for (const auto& f : m["files"])
    if (f["name"] == kSummaryFile) rep.recorded_digest = f["sha256"];
  const fs::path d = dir ? *dir : output_root(cfg) / (cfg.name + "-replay");
  const RunOutcome out = run(cfg, d);
  rep.dir = out.dir;
  rep.exit_code = out.exit_code;
  rep.replay_digest = sha256_file(out.dir / kSummaryFile);
  rep.identical = !rep.recorded_digest.empty() && rep.recorded_digest == rep.replay_digest;
  return rep;
}

}  // namespace vibro::harness

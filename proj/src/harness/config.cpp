#include "vibrolab/harness/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vibro::harness {

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}


class Reader {
 public:
  std::vector<std::string> errors;

  void error(const std::string& where, const std::string& what) { errors.push_back(where + ": " + what); }

  bool parse_double(const std::string& where, const std::string& v, double& out) {
    try {
      std::size_t pos = 0;
      out = std::stod(v, &pos);
      if (pos != v.size() || !std::isfinite(out)) throw std::invalid_argument(v);
      return true;
    } catch (const std::exception&) {
      error(where, "expected a number, got '" + v + "'");
      return false;
    }
  }
  bool parse_size(const std::string& where, const std::string& v, std::size_t& out) {
    try {
      std::size_t pos = 0;
      if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
      const unsigned long long x = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      out = static_cast<std::size_t>(x);
      return true;
    } catch (const std::exception&) {
      error(where, "expected a non-negative integer, got '" + v + "'");
      return false;
    }
  }
  bool parse_int(const std::string& where, const std::string& v, int& out) {
    try {
      std::size_t pos = 0;
      out = std::stoi(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return true;
    } catch (const std::exception&) {
      error(where, "expected an integer, got '" + v + "'");
      return false;
    }
  }
  bool parse_u64(const std::string& where, const std::string& v, std::uint64_t& out) {
    std::size_t s = 0;
    if (!parse_size(where, v, s)) return false;
    out = s;
    return true;
  }
  bool parse_bool(const std::string& where, const std::string& v, bool& out) {
    if (v == "true" || v == "1" || v == "yes") {
      out = true;
      return true;
    }
    if (v == "false" || v == "0" || v == "no") {
      out = false;
      return true;
    }
    error(where, "expected true or false, got '" + v + "'");
    return false;
  }
};

using Handler = std::function<void(Reader&, const std::string& where, const std::string& value)>;

}  // namespace

ConfigError::ConfigError(std::vector<std::string> errors)
    : std::runtime_error(join(errors, "; ")), errors_(std::move(errors)) {}

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> k{"pointer-demo", "exact", "ehrenfest", "fssh",
                                          "mixture",      "hybrid", "scan",     "compare"};
  return k;
}

const std::vector<std::string>& scan_schemes() {
  static const std::vector<std::string> s{"exact", "fssh", "hybrid-coherent", "hybrid-incoherent", "mixture"};
  return s;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  Reader rd;
  std::vector<double> amp_mag, amp_phase;
  bool have_mag = false, have_phase = false;

  std::map<std::string, std::map<std::string, Handler>> table;
  auto& run = table["run"];
  run["experiment"] = [&](Reader&, const std::string&, const std::string& v) { cfg.experiment = v; };
  run["name"] = [&](Reader& r, const std::string& w, const std::string& v) {
    if (v.empty() || v.find_first_of("/\\") != std::string::npos) r.error(w, "must be a plain non-empty name");
    cfg.name = v;
  };
  run["seed"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_u64(w, v, cfg.seed); };
  run["output"] = [&](Reader&, const std::string&, const std::string& v) { cfg.output = v; };

  auto& grid = table["grid"];
  grid["x_min"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, cfg.grid.x_min); };
  grid["x_max"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, cfg.grid.x_max); };
  grid["n_points"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_size(w, v, cfg.grid.n_points);
  };

  auto& pk = table["packet"];
  pk["x0"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, cfg.packet.x0); };
  pk["k0"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, cfg.packet.k0); };
  pk["sigma"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, cfg.packet.sigma); };
  pk["state"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_int(w, v, cfg.packet.state); };
  pk["amplitudes"] = [&](Reader& r, const std::string& w, const std::string& v) {
    have_mag = true;
    for (const auto& s : split_list(v)) {
      double d = 0.0;
      if (r.parse_double(w, s, d)) amp_mag.push_back(d);
    }
  };
  pk["phases"] = [&](Reader& r, const std::string& w, const std::string& v) {
    have_phase = true;
    for (const auto& s : split_list(v)) {
      double d = 0.0;
      if (r.parse_double(w, s, d)) amp_phase.push_back(d);
    }
  };

  auto& in = table["integrator"];
  in["dt"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, cfg.dt); };
  in["n_steps"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_size(w, v, cfg.n_steps); };
  in["stride"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_size(w, v, cfg.stride); };
  in["absorb_width"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_double(w, v, cfg.absorb_width);
  };

  auto& sc = table["scheme"];
  SchemeSpec& s = cfg.scheme;
  sc["n_traj"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_size(w, v, s.n_traj); };
  sc["dt"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, s.dt); };
  sc["frustrated"] = [&](Reader& r, const std::string& w, const std::string& v) {
    if (v != "reject" && v != "reverse") r.error(w, "expected reject or reverse, got '" + v + "'");
    s.frustrated = v;
  };
  sc["coherent"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_bool(w, v, s.coherent); };
  sc["basis_rotation"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_double(w, v, s.basis_rotation);
  };
  sc["merge_dt"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, s.merge_dt); };
  sc["merge_dx"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, s.merge_dx); };
  sc["merge_same_surface"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_bool(w, v, s.merge_same_surface);
  };
  sc["amplitude_floor"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_double(w, v, s.amplitude_floor);
  };
  sc["branch_cap"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_size(w, v, s.branch_cap); };
  sc["prune_budget"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_double(w, v, s.prune_budget);
  };
  sc["window_margin"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_double(w, v, s.window_margin);
  };
  sc["mask_threshold"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_double(w, v, s.mask_threshold);
  };
  sc["energy_gate"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_double(w, v, s.energy_gate);
  };
  sc["keep_history"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_bool(w, v, s.keep_history);
  };

  auto& scn = table["scan"];
  scn["parameter"] = [&](Reader&, const std::string&, const std::string& v) { cfg.scan.parameter = v; };
  scn["values"] = [&](Reader& r, const std::string& w, const std::string& v) {
    cfg.scan.values.clear();
    for (const auto& x : split_list(v)) {
      double d = 0.0;
      if (r.parse_double(w, x, d)) cfg.scan.values.push_back(d);
    }
  };
  scn["schemes"] = [&](Reader&, const std::string&, const std::string& v) { cfg.scan.schemes = split_list(v); };
  scn["focus"] = [&](Reader&, const std::string&, const std::string& v) { cfg.scan.focus = v; };
  scn["scale_horizon"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_bool(w, v, cfg.scan.scale_horizon);
  };

  auto& cmp = table["compare"];
  cmp["artifacts"] = [&](Reader&, const std::string&, const std::string& v) { cfg.compare.artifacts = split_list(v); };
  cmp["kind"] = [&](Reader&, const std::string&, const std::string& v) { cfg.compare.kind = v; };
  cmp["angle"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_double(w, v, cfg.compare.angle); };

  auto& pt = table["pointer"];
  pt["dim_a"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_int(w, v, cfg.pointer.dim_a); };
  pt["dim_e"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_int(w, v, cfg.pointer.dim_e); };
  pt["steps"] = [&](Reader& r, const std::string& w, const std::string& v) { r.parse_size(w, v, cfg.pointer.steps); };
  pt["rotation"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_double(w, v, cfg.pointer.rotation);
  };
  pt["unitary_seed"] = [&](Reader& r, const std::string& w, const std::string& v) {
    r.parse_u64(w, v, cfg.pointer.unitary_seed);
  };

  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string at = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') {
        rd.error(at, "malformed section header");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "channels" && !table.count(section)) {
        rd.error(at, "unknown section [" + section + "]");
        section = "?";
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      rd.error(at, "expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      rd.error(at, "key '" + key + "' outside any section");
      continue;
    }
    if (section == "?") continue;
    const std::string where = section + "." + key;
    if (seen.count(where)) {
      rd.error(where, "duplicate key (first at line " + std::to_string(seen[where]) + ")");
      continue;
    }
    seen[where] = lineno;
    if (section == "model") {
      if (key == "name") {
        cfg.model = value;
      } else {
        double d = 0.0;
        if (rd.parse_double(where, value, d)) cfg.model_params[key] = d;
      }
      continue;
    }
    if (section == "channels") {
      const auto parts = split_list(value);
      if (parts.size() != 3) {
        rd.error(where, "expected 'surface, x_lo, x_hi'");
        continue;
      }
      exact::ChannelSpec ch;
      ch.name = key;
      bool ok = rd.parse_int(where, parts[0], ch.surface);
      ok = rd.parse_double(where, parts[1], ch.x_lo) && ok;
      ok = rd.parse_double(where, parts[2], ch.x_hi) && ok;
      if (ok) cfg.channels.push_back(ch);
      continue;
    }
    auto& keys = table[section];
    auto it = keys.find(key);
    if (it == keys.end()) {
      rd.error(where, "unknown key");
      continue;
    }
    it->second(rd, where, value);
  }

  if (have_phase && !have_mag) rd.error("packet.phases", "given without packet.amplitudes");
  if (have_mag && have_phase && amp_phase.size() != amp_mag.size())
    rd.error("packet.phases", "must have as many entries as packet.amplitudes");
  cfg.amplitudes = amp_mag;
  cfg.phases = amp_phase;
  if (!rd.errors.empty()) throw ConfigError(rd.errors);
  validate(cfg);
  return cfg;
}

void validate(const RunConfig& c) {
  std::vector<std::string> e;
  const auto& kinds = experiment_kinds();
  if (c.experiment.empty()) {
    e.push_back("run.experiment: missing");
  } else if (std::find(kinds.begin(), kinds.end(), c.experiment) == kinds.end()) {
    e.push_back("run.experiment: unknown kind '" + c.experiment + "' (expected " + join(kinds, ", ") + ")");
  }
  auto mass = c.model_params.find("mass");
  if (mass != c.model_params.end() && !(mass->second > 0.0)) e.push_back("model.mass: must be positive");
  int n_states = 2;
  try {
    n_states = models::make(c.model, c.model_params).n_states();
  } catch (const std::exception& ex) {
    if (mass == c.model_params.end() || mass->second > 0.0) e.push_back(std::string("model: ") + ex.what());
  }
  try {
    c.grid.validate();
  } catch (const std::exception& ex) {
    e.push_back(std::string("grid: ") + ex.what());
  }
  if (!(c.dt > 0.0)) e.push_back("integrator.dt: must be positive");
  if (c.n_steps == 0 && c.experiment != "pointer-demo" && c.experiment != "compare")
    e.push_back("integrator.n_steps: must be positive");
  if (c.absorb_width < 0.0) e.push_back("integrator.absorb_width: must be non-negative");
  if (!(c.packet.sigma > 0.0)) e.push_back("packet.sigma: must be positive");
  if (c.packet.state < 0 || c.packet.state >= n_states) e.push_back("packet.state: out of range");
  if (c.experiment != "pointer-demo" && c.experiment != "compare" &&
      (c.packet.x0 - 5.0 * c.packet.sigma < c.grid.x_min || c.packet.x0 + 5.0 * c.packet.sigma > c.grid.x_max))
    e.push_back("packet.x0: packet within 5 sigma of the grid boundary");
  if (!c.amplitudes.empty()) {
    if (static_cast<int>(c.amplitudes.size()) != n_states)
      e.push_back("packet.amplitudes: need one entry per electronic state");
    double a2 = 0.0;
    for (double a : c.amplitudes) a2 += a * a;
    if (std::abs(a2 - 1.0) > 1e-6) e.push_back("packet.amplitudes: squared magnitudes must sum to 1");
  }
  if (c.scheme.n_traj == 0) e.push_back("scheme.n_traj: must be positive");
  if (c.scheme.dt < 0.0) e.push_back("scheme.dt: must be non-negative");
  if (c.scheme.amplitude_floor < 0.0 || c.scheme.amplitude_floor >= 1.0)
    e.push_back("scheme.amplitude_floor: must lie in [0, 1)");
  if (c.scheme.branch_cap == 0) e.push_back("scheme.branch_cap: must be positive");
  if (c.scheme.window_margin < 0.0) e.push_back("scheme.window_margin: must be non-negative");
  if (!(c.scheme.energy_gate > 0.0)) e.push_back("scheme.energy_gate: must be positive");
  for (const auto& ch : c.channels) {
    if (ch.surface < 0 || ch.surface >= n_states) e.push_back("channels." + ch.name + ": surface out of range");
    if (!(ch.x_hi > ch.x_lo)) e.push_back("channels." + ch.name + ": empty interval");
  }
  if (c.experiment == "scan") {
    if (c.scan.values.empty()) e.push_back("scan.values: sweep list is empty");
    for (std::size_t i = 1; i < c.scan.values.size(); ++i)
      if (!(c.scan.values[i] > c.scan.values[i - 1])) {
        e.push_back("scan.values: must be strictly increasing");
        break;
      }
    const auto& ok = scan_schemes();
    if (c.scan.schemes.empty()) e.push_back("scan.schemes: at least one scheme required");
    for (const auto& s : c.scan.schemes)
      if (std::find(ok.begin(), ok.end(), s) == ok.end()) e.push_back("scan.schemes: unknown scheme '" + s + "'");
    const auto& p = c.scan.parameter;
    if (p != "k0" && p != "x0" && p != "sigma" && p.rfind("model.", 0) != 0)
      e.push_back("scan.parameter: expected k0, x0, sigma or model.<name>");
  }
  if (c.experiment == "scan" && !c.scan.focus.empty()) {
    bool found = false;
    for (const auto& ch : c.channels) found = found || ch.name == c.scan.focus;
    if (!c.channels.empty() && !found) e.push_back("scan.focus: no channel named '" + c.scan.focus + "'");
  }
  if (c.experiment == "compare") {
    if (c.compare.artifacts.size() < 2) e.push_back("compare.artifacts: need at least two run directories");
    const std::vector<std::string> kinds{"channels", "diagonal", "bimodality", "curves"};
    if (std::find(kinds.begin(), kinds.end(), c.compare.kind) == kinds.end())
      e.push_back("compare.kind: unknown kind '" + c.compare.kind + "'");
  }
  if (c.experiment == "pointer-demo") {
    if (c.pointer.dim_a < 2 || c.pointer.dim_a > 4) e.push_back("pointer.dim_a: must lie in [2, 4]");
    if (c.pointer.dim_e < 1 || c.pointer.dim_e > 4) e.push_back("pointer.dim_e: must lie in [1, 4]");
    if (c.pointer.steps == 0) e.push_back("pointer.steps: must be positive");
  }
  if (!e.empty()) throw ConfigError(e);
}

std::vector<cd> RunConfig::complex_amplitudes() const {
  std::vector<cd> out;
  for (std::size_t i = 0; i < amplitudes.size(); ++i)
    out.push_back(std::polar(amplitudes[i], i < phases.size() ? phases[i] : 0.0));
  return out;
}

exact::PacketSpec RunConfig::packet_spec() const {
  exact::PacketSpec p = packet;
  p.amplitudes = complex_amplitudes();
  if (!p.amplitudes.empty()) {
    double a2 = 0.0;
    for (const auto& a : p.amplitudes) a2 += std::norm(a);
    for (auto& a : p.amplitudes) a /= std::sqrt(a2);
  }
  return p;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError({"config: cannot open '" + path.string() + "'"});
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string echo_config(const RunConfig& c) {
  std::ostringstream o;
  o << "[run]\nexperiment = " << c.experiment << "\nname = " << c.name << "\nseed = " << c.seed
    << "\noutput = " << c.output << "\n\n";
  o << "[model]\nname = " << c.model << "\n";
  for (const auto& [k, v] : c.model_params) o << k << " = " << fmt(v) << "\n";
  o << "\n[grid]\nx_min = " << fmt(c.grid.x_min) << "\nx_max = " << fmt(c.grid.x_max)
    << "\nn_points = " << c.grid.n_points << "\n\n";
  o << "[packet]\nx0 = " << fmt(c.packet.x0) << "\nk0 = " << fmt(c.packet.k0) << "\nsigma = " << fmt(c.packet.sigma)
    << "\nstate = " << c.packet.state << "\n";
  if (!c.amplitudes.empty()) {
    std::vector<std::string> m, p;
    for (double a : c.amplitudes) m.push_back(fmt(a));
    for (double a : c.phases) p.push_back(fmt(a));
    o << "amplitudes = " << join(m, ", ") << "\n";
    if (!p.empty()) o << "phases = " << join(p, ", ") << "\n";
  }
  o << "\n[integrator]\ndt = " << fmt(c.dt) << "\nn_steps = " << c.n_steps << "\nstride = " << c.stride
    << "\nabsorb_width = " << fmt(c.absorb_width) << "\n\n";
  const auto& s = c.scheme;
  o << "[scheme]\nn_traj = " << s.n_traj << "\ndt = " << fmt(s.dt) << "\nfrustrated = " << s.frustrated
    << "\ncoherent = " << (s.coherent ? "true" : "false") << "\nbasis_rotation = " << fmt(s.basis_rotation)
    << "\nmerge_dt = " << fmt(s.merge_dt) << "\nmerge_dx = " << fmt(s.merge_dx)
    << "\nmerge_same_surface = " << (s.merge_same_surface ? "true" : "false")
    << "\namplitude_floor = " << fmt(s.amplitude_floor) << "\nbranch_cap = " << s.branch_cap
    << "\nprune_budget = " << fmt(s.prune_budget) << "\nwindow_margin = " << fmt(s.window_margin)
    << "\nmask_threshold = " << fmt(s.mask_threshold) << "\nenergy_gate = " << fmt(s.energy_gate)
    << "\nkeep_history = " << (s.keep_history ? "true" : "false") << "\n";
  if (!c.channels.empty()) {
    o << "\n[channels]\n";
    for (const auto& ch : c.channels)
      o << ch.name << " = " << ch.surface << ", " << fmt(ch.x_lo) << ", " << fmt(ch.x_hi) << "\n";
  }
  if (c.experiment == "scan") {
    std::vector<std::string> v;
    for (double x : c.scan.values) v.push_back(fmt(x));
    o << "\n[scan]\nparameter = " << c.scan.parameter << "\nvalues = " << join(v, ", ")
      << "\nschemes = " << join(c.scan.schemes, ", ") << "\n";
    if (!c.scan.focus.empty()) o << "focus = " << c.scan.focus << "\n";
    o << "scale_horizon = " << (c.scan.scale_horizon ? "true" : "false") << "\n";
  }
  if (c.experiment == "compare") {
    o << "\n[compare]\nartifacts = " << join(c.compare.artifacts, ", ") << "\nkind = " << c.compare.kind
      << "\nangle = " << fmt(c.compare.angle) << "\n";
  }
  if (c.experiment == "pointer-demo") {
    o << "\n[pointer]\ndim_a = " << c.pointer.dim_a << "\ndim_e = " << c.pointer.dim_e
      << "\nsteps = " << c.pointer.steps << "\nrotation = " << fmt(c.pointer.rotation)
      << "\nunitary_seed = " << c.pointer.unitary_seed << "\n";
  }
  return o.str();
}

}  // namespace vibro::harness

#include "vibrolab/models.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace vibro {

namespace {

ParamMap merge(ParamMap defaults, const ParamMap& overrides, const std::string& model) {
  for (const auto& [k, v] : overrides) {
    auto it = defaults.find(k);
    if (it == defaults.end()) throw std::invalid_argument("model " + model + ": unknown parameter '" + k + "'");
    if (!std::isfinite(v)) throw std::invalid_argument("model " + model + ": parameter '" + k + "' is not finite");
    it->second = v;
  }
  if (!(defaults.at("mass") > 0.0)) throw std::invalid_argument("model " + model + ": mass must be positive");
  return defaults;
}

void require_positive(const ParamMap& p, const std::string& model, std::initializer_list<const char*> keys) {
  for (const char* k : keys)
    if (!(p.at(k) > 0.0)) throw std::invalid_argument("model " + model + ": parameter '" + k + "' must be positive");
}

double upper_adiabat(const Sym2& v) {
  const double m = 0.5 * (v.v11 + v.v22);
  const double d = 0.5 * (v.v11 - v.v22);
  return m + std::hypot(d, v.v12);
}

const ParamMap kSingleDefaults{{"A", 0.01}, {"B", 1.6}, {"C", 0.005}, {"D", 1.0}, {"mass", 2000.0}};
const ParamMap kDualDefaults{{"A", 0.1},  {"B", 0.28},   {"C", 0.015},           {"D", 0.06},
                             {"E0", 0.05}, {"mass", 2000.0}, {"coupling_offset", 0.0}};
const ParamMap kSurfaceDefaults{{"asymptote", 0.04},      {"well_depth", 0.02},     {"well_range", 0.5},
                                {"well_position", 4.0},   {"wall_height", 0.0063},  {"wall_stiffness", 3.0},
                                {"coupling", 0.0033},     {"coupling_width", 0.5},  {"coupling_center", 3.6},
                                {"mass", 2000.0}};
const ParamMap kDiagonalDefaults{{"gap", 0.02}, {"slope", 0.0}, {"mass", 2000.0}};
const ParamMap kLinearDefaults{{"slope", 0.01}, {"coupling", 0.005}, {"mass", 2000.0}};
const ParamMap kConstantDefaults{{"bias", 0.0}, {"coupling", 0.01}, {"mass", 2000.0}};

}  // namespace

DiabaticModel DiabaticModel::two_state(std::string name, ParamMap params, Sym2Fn fn) {
  DiabaticModel m;
  m.name_ = std::move(name);
  m.n_states_ = 2;
  m.params_ = std::move(params);
  m.sym2_ = std::move(fn);
  return m;
}

DiabaticModel DiabaticModel::general(std::string name, int n_states, ParamMap params, MatrixFn v, MatrixFn dv) {
  if (n_states < 1) throw std::invalid_argument("model needs at least one state");
  DiabaticModel m;
  m.name_ = std::move(name);
  m.n_states_ = n_states;
  m.params_ = std::move(params);
  m.v_ = std::move(v);
  m.dv_ = std::move(dv);
  return m;
}

double DiabaticModel::param(const std::string& key) const {
  auto it = params_.find(key);
  if (it == params_.end()) throw std::out_of_range("model " + name_ + " has no parameter '" + key + "'");
  return it->second;
}

Eigen::MatrixXd DiabaticModel::potential(double x) const {
  if (sym2_) {
    Sym2 v, dv;
    sym2_(x, v, dv);
    Eigen::MatrixXd m(2, 2);
    m << v.v11, v.v12, v.v12, v.v22;
    return m;
  }
  return v_(x);
}

Eigen::MatrixXd DiabaticModel::gradient(double x) const {
  if (sym2_) {
    Sym2 v, dv;
    sym2_(x, v, dv);
    Eigen::MatrixXd m(2, 2);
    m << dv.v11, dv.v12, dv.v12, dv.v22;
    return m;
  }
  return dv_(x);
}

namespace models {

DiabaticModel single_crossing(const ParamMap& overrides) {
  const ParamMap p = merge(kSingleDefaults, overrides, "single_crossing");
  require_positive(p, "single_crossing", {"A", "B", "C", "D"});
  const double A = p.at("A"), B = p.at("B"), C = p.at("C"), D = p.at("D");
  return DiabaticModel::two_state("single_crossing", p, [=](double x, Sym2& v, Sym2& dv) {
    const double e = std::exp(-B * std::abs(x));
    v.v11 = x >= 0.0 ? A * (1.0 - e) : -A * (1.0 - e);
    dv.v11 = A * B * e;
    v.v22 = -v.v11;
    dv.v22 = -dv.v11;
    const double g = std::exp(-D * x * x);
    v.v12 = C * g;
    dv.v12 = -2.0 * D * x * C * g;
  });
}

DiabaticModel dual_crossing(const ParamMap& overrides) {
  const ParamMap p = merge(kDualDefaults, overrides, "dual_crossing");
  require_positive(p, "dual_crossing", {"A", "B", "C", "D", "E0"});
  if (p.at("coupling_offset") < 0.0)
    throw std::invalid_argument("model dual_crossing: parameter 'coupling_offset' must be >= 0");
  const double A = p.at("A"), B = p.at("B"), C = p.at("C"), D = p.at("D"), E0 = p.at("E0");
  const double s = p.at("coupling_offset");
  return DiabaticModel::two_state("dual_crossing", p, [=](double x, Sym2& v, Sym2& dv) {
    v.v11 = 0.0;
    dv.v11 = 0.0;
    const double g = std::exp(-B * x * x);
    v.v22 = E0 - A * g;
    dv.v22 = 2.0 * A * B * x * g;
    const double gl = std::exp(-D * (x - s) * (x - s));
    const double gr = std::exp(-D * (x + s) * (x + s));
    v.v12 = 0.5 * C * (gl + gr);
    dv.v12 = -C * D * ((x - s) * gl + (x + s) * gr);
  });
}

DiabaticModel surface_scattering(const ParamMap& overrides) {
  const ParamMap p = merge(kSurfaceDefaults, overrides, "surface_scattering");
  require_positive(p, "surface_scattering",
                   {"asymptote", "well_depth", "well_range", "wall_height", "wall_stiffness", "coupling",
                    "coupling_width"});
  const double gap = p.at("asymptote"), De = p.at("well_depth"), a = p.at("well_range");
  const double xe = p.at("well_position"), W = p.at("wall_height"), beta = p.at("wall_stiffness");
  const double C = p.at("coupling"), w = p.at("coupling_width"), xc = p.at("coupling_center");
  if (gap < 2.0 * C)
    throw std::invalid_argument("model surface_scattering: asymptotic gap must exceed twice the coupling");
  DiabaticModel m = DiabaticModel::two_state("surface_scattering", p, [=](double x, Sym2& v, Sym2& dv) {
    v.v11 = W * std::exp(-beta * (x - xe));
    dv.v11 = -beta * v.v11;
    const double e = std::exp(-a * (x - xe));
    v.v22 = gap + De * ((1.0 - e) * (1.0 - e) - 1.0);
    dv.v22 = 2.0 * De * (1.0 - e) * a * e;
    const double g = std::exp(-(x - xc) * (x - xc) / (2.0 * w * w));
    v.v12 = C * g;
    dv.v12 = -(x - xc) / (w * w) * v.v12;
  });
  WellInfo well;
  if (!find_upper_well(m, xe - 6.0 / beta, xe + 40.0 / a, well) || well.energy >= gap) {
    std::ostringstream os;
    os << "model surface_scattering: parameters give no bound well on the upper adiabat (asymptote " << gap
       << ", well_depth " << De << ", wall_height " << W << ")";
    throw std::invalid_argument(os.str());
  }
  return m;
}

DiabaticModel diagonal(const ParamMap& overrides) {
  const ParamMap p = merge(kDiagonalDefaults, overrides, "diagonal");
  const double gap = p.at("gap"), f = p.at("slope");
  return DiabaticModel::two_state("diagonal", p, [=](double x, Sym2& v, Sym2& dv) {
    v.v11 = f * x;
    v.v22 = f * x + gap;
    v.v12 = 0.0;
    dv.v11 = f;
    dv.v22 = f;
    dv.v12 = 0.0;
  });
}

DiabaticModel linear_crossing(const ParamMap& overrides) {
  const ParamMap p = merge(kLinearDefaults, overrides, "linear_crossing");
  require_positive(p, "linear_crossing", {"coupling"});
  const double k = p.at("slope"), c = p.at("coupling");
  return DiabaticModel::two_state("linear_crossing", p, [=](double x, Sym2& v, Sym2& dv) {
    v.v11 = k * x;
    v.v22 = -k * x;
    v.v12 = c;
    dv.v11 = k;
    dv.v22 = -k;
    dv.v12 = 0.0;
  });
}

DiabaticModel constant_coupling(const ParamMap& overrides) {
  const ParamMap p = merge(kConstantDefaults, overrides, "constant_coupling");
  const double b = p.at("bias"), c = p.at("coupling");
  return DiabaticModel::two_state("constant_coupling", p, [=](double, Sym2& v, Sym2& dv) {
    v.v11 = b;
    v.v22 = -b;
    v.v12 = c;
    dv = Sym2{};
  });
}

std::vector<ModelInfo> registry() {
  return {
      {"single_crossing", "one avoided crossing at x=0 (Tully I form)", kSingleDefaults},
      {"dual_crossing", "two avoided crossings, symmetric in x (Tully II form, optional split coupling)",
       kDualDefaults},
      {"surface_scattering", "reflective lower adiabat, trapping well on the upper adiabat", kSurfaceDefaults},
      {"diagonal", "uncoupled parallel diabats", kDiagonalDefaults},
      {"linear_crossing", "V11 = kx, V22 = -kx, constant coupling", kLinearDefaults},
      {"constant_coupling", "x-independent [[b, c], [c, -b]]", kConstantDefaults},
  };
}

DiabaticModel make(const std::string& name, const ParamMap& overrides) {
  if (name == "single_crossing") return single_crossing(overrides);
  if (name == "dual_crossing") return dual_crossing(overrides);
  if (name == "surface_scattering") return surface_scattering(overrides);
  if (name == "diagonal") return diagonal(overrides);
  if (name == "linear_crossing") return linear_crossing(overrides);
  if (name == "constant_coupling") return constant_coupling(overrides);
  throw std::invalid_argument("unknown model '" + name + "'");
}

bool find_upper_well(const DiabaticModel& m, double x_lo, double x_hi, WellInfo& out) {
  if (!m.has_sym2()) return false;
  const int n = 20000;
  const double h = (x_hi - x_lo) / n;
  auto eu = [&](double x) {
    Sym2 v, dv;
    m.eval2(x, v, dv);
    return upper_adiabat(v);
  };
  int best = -1;
  double best_e = 0.0;
  for (int i = 1; i < n; ++i) {
    const double x = x_lo + i * h;
    const double e0 = eu(x - h), e1 = eu(x), e2 = eu(x + h);
    if (e1 < e0 && e1 <= e2 && (best < 0 || e1 < best_e)) {
      best = i;
      best_e = e1;
    }
  }
  if (best < 0) return false;
  // golden-section refinement
  double a = x_lo + (best - 1) * h, b = x_lo + (best + 1) * h;
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80; ++it) {
    const double c = b - r * (b - a), d = a + r * (b - a);
    if (eu(c) < eu(d)) b = d;
    else a = c;
  }
  const double xm = 0.5 * (a + b);
  const double hh = 1e-3;
  out.x_min = xm;
  out.energy = eu(xm);
  out.curvature = (eu(xm + hh) - 2.0 * eu(xm) + eu(xm - hh)) / (hh * hh);
  return out.curvature > 0.0;
}

}  // namespace models
}  // namespace vibro

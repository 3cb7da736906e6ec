// One-dimensional diabatic potential models.
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace vibro {

using ParamMap = std::map<std::string, double>;

// Packed symmetric 2x2 matrix.
struct Sym2 {
  double v11 = 0.0;
  double v22 = 0.0;
  double v12 = 0.0;
};

class DiabaticModel {
 public:
  using Sym2Fn = std::function<void(double x, Sym2& v, Sym2& dv)>;
  using MatrixFn = std::function<Eigen::MatrixXd(double x)>;

  static DiabaticModel two_state(std::string name, ParamMap params, Sym2Fn fn);
  static DiabaticModel general(std::string name, int n_states, ParamMap params, MatrixFn v, MatrixFn dv);

  const std::string& name() const { return name_; }
  int n_states() const { return n_states_; }
  double mass() const { return params_.at("mass"); }
  const ParamMap& params() const { return params_; }
  double param(const std::string& key) const;

  Eigen::MatrixXd potential(double x) const;
  Eigen::MatrixXd gradient(double x) const;  // dV/dx
  bool has_sym2() const { return static_cast<bool>(sym2_); }
  void eval2(double x, Sym2& v, Sym2& dv) const { sym2_(x, v, dv); }

 private:
  std::string name_;
  int n_states_ = 2;
  ParamMap params_;
  Sym2Fn sym2_;
  MatrixFn v_;
  MatrixFn dv_;
};

namespace models {

// Defaults follow the standard Tully forms.
DiabaticModel single_crossing(const ParamMap& overrides = {});
// V11 = 0, V22 = E0 - A exp(-B x^2), V12 = C/2 [exp(-D (x-s)^2) + exp(-D (x+s)^2)], s = coupling_offset.
DiabaticModel dual_crossing(const ParamMap& overrides = {});
// Repulsive wall on the lower diabat, Morse well on the upper, Gaussian coupling.
DiabaticModel surface_scattering(const ParamMap& overrides = {});

DiabaticModel diagonal(const ParamMap& overrides = {});
DiabaticModel linear_crossing(const ParamMap& overrides = {});
DiabaticModel constant_coupling(const ParamMap& overrides = {});

struct ModelInfo {
  std::string name;
  std::string description;
  ParamMap defaults;
};

std::vector<ModelInfo> registry();
DiabaticModel make(const std::string& name, const ParamMap& overrides = {});

// Upper-adiabat well of a two-state model: location and curvature. Returns false if none.
struct WellInfo {
  double x_min = 0.0;
  double energy = 0.0;
  double curvature = 0.0;
};
bool find_upper_well(const DiabaticModel& m, double x_lo, double x_hi, WellInfo& out);

}  // namespace models
}  // namespace vibro

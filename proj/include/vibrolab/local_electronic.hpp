// Adiabatic quantities evaluated at an arbitrary nuclear position.
#pragma once

#include <complex>

#include <Eigen/Dense>

#include "vibrolab/models.hpp"

namespace vibro::mqc {

inline constexpr int kMaxStates = 4;

using SmallMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStates, kMaxStates>;
using SmallVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxStates, 1>;
using SmallCVec = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, 1, 0, kMaxStates, 1>;
using SmallCMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxStates, kMaxStates>;

struct ElectronicPoint {
  double x = 0.0;
  SmallVec energy;    // ascending
  SmallVec gradient;  // d energy / dx
  SmallMat frame;     // columns are adiabatic states in the diabatic basis
  SmallMat d1;        // <phi_n | d phi_m / dx>
  SmallMat vdiab;     // diabatic V(x)
  SmallMat dvdiab;    // diabatic V'(x)
};

class LocalElectronic {
 public:
  explicit LocalElectronic(const DiabaticModel& model);

  int n_states() const { return n_; }
  double mass() const { return mass_; }
  const DiabaticModel& model() const { return *model_; }

  // Column signs follow `reference` when given, otherwise the largest
  // component of each column is made positive.
  ElectronicPoint at(double x, const ElectronicPoint* reference = nullptr) const;

 private:
  const DiabaticModel* model_;
  int n_;
  double mass_;
};

// exp(-i H h) c for Hermitian H (closed form for 2 states).
void apply_exponential(const SmallCMat& h_eff, double h, SmallCVec& c);

// Adiabatic amplitudes over one nuclear step between points a and b with
// velocities va, vb: i c' = (eps - i v d1) c, exponential midpoint substeps.
void propagate_amplitudes(SmallCVec& c, const ElectronicPoint& a, double va, const ElectronicPoint& b, double vb,
                          double dt);

}  // namespace vibro::mqc

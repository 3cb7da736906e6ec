#include "vibrolab/local_electronic.hpp"

#include <cmath>
#include <stdexcept>

#include "vibrolab/kernels.hpp"

namespace vibro::mqc {

LocalElectronic::LocalElectronic(const DiabaticModel& model)
    : model_(&model), n_(model.n_states()), mass_(model.mass()) {
  if (n_ > kMaxStates) throw std::invalid_argument("trajectory engines support at most 4 states");
}

ElectronicPoint LocalElectronic::at(double x, const ElectronicPoint* reference) const {
  ElectronicPoint p;
  p.x = x;
  const int n = n_;
  p.energy.resize(n);
  p.gradient.resize(n);
  p.frame.resize(n, n);
  p.d1.setZero(n, n);
  p.vdiab.resize(n, n);
  p.dvdiab.resize(n, n);
  if (model_->has_sym2()) {
    Sym2 v, dv;
    model_->eval2(x, v, dv);
    p.vdiab << v.v11, v.v12, v.v12, v.v22;
    p.dvdiab << dv.v11, dv.v12, dv.v12, dv.v22;
    double f[4];
    kernels::sym2_eigen(v.v11, v.v22, v.v12, p.energy(0), p.energy(1), f);
    p.frame << f[0], f[1], f[2], f[3];
  } else {
    const Eigen::MatrixXd v = model_->potential(x);
    const Eigen::MatrixXd dv = model_->gradient(x);
    p.vdiab = v;
    p.dvdiab = dv;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(v);
    p.energy = es.eigenvalues();
    p.frame = es.eigenvectors();
  }
  for (int c = 0; c < n; ++c) {
    double s = 1.0;
    if (reference != nullptr) {
      s = p.frame.col(c).dot(reference->frame.col(c)) < 0.0 ? -1.0 : 1.0;
    } else {
      Eigen::Index imax = 0;
      p.frame.col(c).cwiseAbs().maxCoeff(&imax);
      s = p.frame(imax, c) < 0.0 ? -1.0 : 1.0;
    }
    if (s < 0.0) p.frame.col(c) = -p.frame.col(c);
  }
  // Hellmann-Feynman gradients and couplings
  const SmallMat g = p.frame.transpose() * p.dvdiab * p.frame;
  for (int a = 0; a < n; ++a) {
    p.gradient(a) = g(a, a);
    for (int b = 0; b < n; ++b) {
      if (a == b) continue;
      const double gap = p.energy(b) - p.energy(a);
      p.d1(a, b) = std::abs(gap) > 1e-300 ? g(a, b) / gap : 0.0;
    }
  }
  return p;
}

void apply_exponential(const SmallCMat& h_eff, double h, SmallCVec& c) {
  using cd = std::complex<double>;
  if (h_eff.rows() == 2) {
    const double a = h_eff(0, 0).real(), b = h_eff(1, 1).real();
    const cd off = h_eff(0, 1);
    const double m = 0.5 * (a + b), d = 0.5 * (a - b);
    const double r = std::sqrt(d * d + std::norm(off));
    const cd g = std::polar(1.0, -m * h);
    const double cr = std::cos(r * h);
    const double sr = r > 1e-300 ? std::sin(r * h) / r : h;
    const cd mi(0.0, -1.0);
    const cd u00 = g * (cr + mi * sr * d);
    const cd u11 = g * (cr - mi * sr * d);
    const cd u01 = g * mi * sr * off;
    const cd u10 = g * mi * sr * std::conj(off);
    const cd c0 = c(0), c1 = c(1);
    c(0) = u00 * c0 + u01 * c1;
    c(1) = u10 * c0 + u11 * c1;
    return;
  }
  if (h_eff.rows() == 1) {
    c(0) *= std::polar(1.0, -h_eff(0, 0).real() * h);
    return;
  }
  Eigen::SelfAdjointEigenSolver<SmallCMat> es(h_eff);
  SmallCVec tmp = es.eigenvectors().adjoint() * c;
  for (Eigen::Index k = 0; k < tmp.size(); ++k) tmp(k) *= std::polar(1.0, -es.eigenvalues()(k) * h);
  c = es.eigenvectors() * tmp;
}

// Electronic amplitudes over one nuclear step, exponential midpoint with
// linear interpolation of the effective Hamiltonian between the endpoints.
void propagate_amplitudes(SmallCVec& c, const ElectronicPoint& a, double va, const ElectronicPoint& b, double vb,
                     double dt) {
  const int n = static_cast<int>(c.size());
  double spread = 0.0, cmax = 0.0;
  for (int i = 0; i < n; ++i) spread = std::max(spread, std::abs(a.energy(i) - a.energy(0)));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cmax = std::max({cmax, std::abs(va * a.d1(i, j)), std::abs(vb * b.d1(i, j))});
  const int nsub = std::clamp(static_cast<int>(std::ceil((spread + cmax) * dt / 0.05)), 1, 1000);
  const double h = dt / nsub;
  SmallCMat heff(n, n);
  for (int s = 0; s < nsub; ++s) {
    const double f = (s + 0.5) / nsub;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double vd = (1.0 - f) * va * a.d1(i, j) + f * vb * b.d1(i, j);
        heff(i, j) = std::complex<double>(i == j ? (1.0 - f) * a.energy(i) + f * b.energy(i) : 0.0, -vd);
      }
    apply_exponential(heff, h, c);
  }
}

}  // namespace vibro::mqc

#include "vibrolab/composite.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

namespace vibro::composite {

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void require_unitary(const CMatrix& u, double tol, const char* what) {
  if (u.rows() != u.cols()) throw std::invalid_argument(std::string(what) + ": not square");
  const double err = unitarity_error(u);
  if (err > tol)
    throw std::invalid_argument(std::string(what) + ": not unitary (error " + fmt_num(err) + ")");
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace

CVector CompositeState::vec() const {
  CVector v(amp.size());
  for (int a = 0; a < dim_a(); ++a)
    for (int e = 0; e < dim_e(); ++e) v(a * dim_e() + e) = amp(a, e);
  return v;
}

CompositeState CompositeState::from_vec(const CVector& v, int dim_a, int dim_e) {
  if (v.size() != dim_a * dim_e) throw std::invalid_argument("from_vec: dimension mismatch");
  CompositeState s;
  s.amp.resize(dim_a, dim_e);
  for (int a = 0; a < dim_a; ++a)
    for (int e = 0; e < dim_e; ++e) s.amp(a, e) = v(a * dim_e + e);
  return s;
}

double DensityOperator::purity() const { return (mat * mat).trace().real(); }

DensityOperator DensityOperator::pure(const CompositeState& s) {
  const CVector v = s.vec();
  return DensityOperator{v * v.adjoint()};
}

void DensityOperator::validate(double herm_tol, double trace_tol, double psd_tol) const {
  const double herm = (mat - mat.adjoint()).cwiseAbs().maxCoeff();
  if (herm > herm_tol) throw std::domain_error("density operator not Hermitian: " + fmt_num(herm));
  const double tr = std::abs(trace() - cd(1.0, 0.0));
  if (tr > trace_tol) throw std::domain_error("density operator trace deviates by " + fmt_num(tr));
  Eigen::SelfAdjointEigenSolver<CMatrix> es(mat, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -psd_tol)
    throw std::domain_error("density operator has negative eigenvalue " +
                            fmt_num(es.eigenvalues().minCoeff()));
}

CompositeState compose(const CVector& sub, const CVector& env) {
  if (sub.size() < 1 || env.size() < 1) throw std::invalid_argument("compose: empty factor");
  if (std::abs(sub.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("compose: subsystem vector not normalized (norm " + fmt_num(sub.norm()) + ")");
  if (std::abs(env.norm() - 1.0) > 1e-10)
    throw std::invalid_argument("compose: environment vector not normalized (norm " + fmt_num(env.norm()) + ")");
  CompositeState s;
  s.amp = sub * env.transpose();
  return s;
}

std::vector<RebasisTerm> rebasis_subsystem(const CompositeState& state, const CMatrix& new_frame) {
  if (new_frame.rows() != state.dim_a()) throw std::invalid_argument("rebasis_subsystem: frame dimension mismatch");
  require_unitary(new_frame, 1e-10, "rebasis_subsystem");
  // row l of frame^dagger * amp is the unnormalized record b_l |B_l>
  const CMatrix proj = new_frame.adjoint() * state.amp;
  std::vector<RebasisTerm> out(static_cast<std::size_t>(state.dim_a()));
  for (int l = 0; l < state.dim_a(); ++l) {
    CVector rec = proj.row(l).transpose();
    const double nrm = rec.norm();
    RebasisTerm& t = out[static_cast<std::size_t>(l)];
    if (nrm < kZeroBranch) {
      t.coeff = 0.0;
      t.record = CVector::Zero(state.dim_e());
      t.undefined = true;
      continue;
    }
    // put the phase of the largest record component into b_l
    Eigen::Index imax = 0;
    rec.cwiseAbs().maxCoeff(&imax);
    const cd ph = rec(imax) / std::abs(rec(imax));
    t.coeff = nrm * ph;
    t.record = rec / t.coeff;
  }
  return out;
}

CompositeState recombine(const std::vector<RebasisTerm>& terms, const CMatrix& frame) {
  if (terms.empty()) throw std::invalid_argument("recombine: no terms");
  const auto dim_e = terms.front().record.size();
  CompositeState s;
  s.amp = CMatrix::Zero(frame.rows(), dim_e);
  for (std::size_t l = 0; l < terms.size(); ++l) {
    if (terms[l].undefined) continue;
    s.amp += terms[l].coeff * frame.col(static_cast<Eigen::Index>(l)) * terms[l].record.transpose();
  }
  return s;
}

int SchmidtDecomposition::rank(double eps) const {
  return static_cast<int>((coefficients.array() > eps).count());
}

CompositeState SchmidtDecomposition::reconstruct() const {
  CompositeState s;
  s.amp = CMatrix::Zero(sub_basis.rows(), env_basis.rows());
  for (Eigen::Index k = 0; k < coefficients.size(); ++k)
    s.amp += coefficients(k) * sub_basis.col(k) * env_basis.col(k).transpose();
  return s;
}

SchmidtDecomposition schmidt(const CompositeState& state) {
  Eigen::JacobiSVD<CMatrix> svd(state.amp, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SchmidtDecomposition out;
  out.coefficients = svd.singularValues();
  out.sub_basis = svd.matrixU();
  // amp = U S V^dagger  =>  |psi> = sum_k s_k u_k (x) conj(v_k)
  out.env_basis = svd.matrixV().conjugate();
  return out;
}

DensityOperator partial_trace(const DensityOperator& rho, int dim_a, int dim_e, Keep keep) {
  if (dim_a < 1 || dim_e < 1 || rho.dim() != dim_a * dim_e)
    throw std::invalid_argument("partial_trace: dimension mismatch (" + std::to_string(rho.dim()) +
                                " != " + std::to_string(dim_a) + "*" + std::to_string(dim_e) + ")");
  DensityOperator out;
  if (keep == Keep::subsystem) {
    out.mat = CMatrix::Zero(dim_a, dim_a);
    for (int a = 0; a < dim_a; ++a)
      for (int b = 0; b < dim_a; ++b) {
        cd acc = 0.0;
        for (int e = 0; e < dim_e; ++e) acc += rho.mat(a * dim_e + e, b * dim_e + e);
        out.mat(a, b) = acc;
      }
  } else {
    out.mat = CMatrix::Zero(dim_e, dim_e);
    for (int e = 0; e < dim_e; ++e)
      for (int f = 0; f < dim_e; ++f) {
        cd acc = 0.0;
        for (int a = 0; a < dim_a; ++a) acc += rho.mat(a * dim_e + e, a * dim_e + f);
        out.mat(e, f) = acc;
      }
  }
  return out;
}

double entropy_of_weights(const Eigen::VectorXd& p) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 1e-300) s -= p(i) * std::log(p(i));
  return std::max(0.0, s);
}

double entropy(const DensityOperator& rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.mat, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (ev(i) < 1e-15) ev(i) = 0.0;
  return entropy_of_weights(ev);
}

PointerEvolution synthesize_pointer_evolution(const CMatrix& pointer_frame,
                                              const std::vector<CMatrix>& env_unitaries) {
  const auto dim_a = pointer_frame.rows();
  if (static_cast<Eigen::Index>(env_unitaries.size()) != dim_a)
    throw std::invalid_argument("synthesize_pointer_evolution: need one environment unitary per pointer state");
  require_unitary(pointer_frame, 1e-12, "pointer frame");
  const auto dim_e = env_unitaries.front().rows();
  for (const auto& u : env_unitaries) {
    if (u.rows() != dim_e) throw std::invalid_argument("environment unitaries differ in dimension");
    require_unitary(u, 1e-12, "environment unitary");
  }
  PointerEvolution ev;
  ev.dim_a = static_cast<int>(dim_a);
  ev.dim_e = static_cast<int>(dim_e);
  ev.pointer_frame = pointer_frame;
  ev.env_unitaries = env_unitaries;
  ev.total = CMatrix::Zero(dim_a * dim_e, dim_a * dim_e);
  for (Eigen::Index n = 0; n < dim_a; ++n) {
    const CMatrix proj = pointer_frame.col(n) * pointer_frame.col(n).adjoint();
    ev.total += kron(proj, env_unitaries[static_cast<std::size_t>(n)]);
  }
  return ev;
}

PreferredEvolution synthesize_preferred_evolution(const std::vector<CMatrix>& frames,
                                                  const std::vector<CMatrix>& sector_unitaries) {
  if (frames.empty() || sector_unitaries.empty())
    throw std::invalid_argument("synthesize_preferred_evolution: empty input");
  const auto dim_a = frames.front().rows();
  const auto dim_e = static_cast<Eigen::Index>(frames.size());
  if (static_cast<Eigen::Index>(sector_unitaries.size()) != dim_a)
    throw std::invalid_argument("synthesize_preferred_evolution: need one sector unitary per subsystem state");
  for (const auto& w : frames) {
    if (w.rows() != dim_a) throw std::invalid_argument("frames differ in dimension");
    require_unitary(w, 1e-12, "preferred frame");
  }
  for (const auto& a : sector_unitaries) {
    if (a.rows() != dim_e)
      throw std::invalid_argument("frame count (" + std::to_string(dim_e) +
                                  ") does not match sector unitary dimension (" + std::to_string(a.rows()) + ")");
    require_unitary(a, 1e-12, "sector unitary");
  }
  PreferredEvolution ev;
  ev.dim_a = static_cast<int>(dim_a);
  ev.dim_e = static_cast<int>(dim_e);
  ev.frames = frames;
  ev.sector_unitaries = sector_unitaries;
  ev.total = CMatrix::Zero(dim_a * dim_e, dim_a * dim_e);
  for (Eigen::Index n = 0; n < dim_a; ++n) {
    const CMatrix& an = sector_unitaries[static_cast<std::size_t>(n)];
    for (Eigen::Index j = 0; j < dim_e; ++j)
      for (Eigen::Index i = 0; i < dim_e; ++i) {
        const cd a = an(j, i);
        if (a == cd(0.0)) continue;
        const CMatrix sub = frames[static_cast<std::size_t>(j)].col(n) *
                            frames[static_cast<std::size_t>(i)].col(n).adjoint();
        // |O_j><O_i| is a single entry
        for (Eigen::Index r = 0; r < dim_a; ++r)
          for (Eigen::Index c = 0; c < dim_a; ++c) ev.total(r * dim_e + j, c * dim_e + i) += a * sub(r, c);
      }
  }
  return ev;
}

CompositeState evolve(const CompositeState& s, const CMatrix& u, int steps) {
  if (u.rows() != s.dim_a() * s.dim_e()) throw std::invalid_argument("evolve: dimension mismatch");
  CVector v = s.vec();
  for (int k = 0; k < steps; ++k) v = u * v;
  CompositeState out = CompositeState::from_vec(v, s.dim_a(), s.dim_e());
  out.labels_a = s.labels_a;
  out.labels_e = s.labels_e;
  return out;
}

DensityOperator evolve(const DensityOperator& rho, const CMatrix& u, int steps) {
  if (u.rows() != rho.dim()) throw std::invalid_argument("evolve: dimension mismatch");
  CMatrix m = rho.mat;
  for (int k = 0; k < steps; ++k) m = u * m * u.adjoint();
  return DensityOperator{m};
}

CMatrix FrameSet::sector_projector(int n, int dim_a, int dim_e) const {
  CMatrix p = CMatrix::Zero(dim_a * dim_e, dim_a * dim_e);
  for (int i = 0; i < dim_e; ++i) {
    const CVector col = at(i).col(n);
    for (int r = 0; r < dim_a; ++r)
      for (int c = 0; c < dim_a; ++c) p(r * dim_e + i, c * dim_e + i) = col(r) * std::conj(col(c));
  }
  return p;
}

CMatrix sector_amplitudes(const CompositeState& s, const FrameSet& frames) {
  CMatrix a(s.dim_a(), s.dim_e());
  for (int i = 0; i < s.dim_e(); ++i) a.col(i) = frames.at(i).adjoint() * s.amp.col(i);
  return a;
}

Eigen::VectorXd sector_populations(const CompositeState& s, const FrameSet& frames) {
  return sector_amplitudes(s, frames).rowwise().squaredNorm();
}

DensityOperator build_mixture(const CompositeState& s, const FrameSet& frames, MixtureMode mode) {
  const int da = s.dim_a();
  const int de = s.dim_e();
  const int dim = da * de;
  const CMatrix a = sector_amplitudes(s, frames);
  DensityOperator out{CMatrix::Zero(dim, dim)};
  auto basis_vec = [&](int n, int i) {
    CVector v = CVector::Zero(dim);
    const CVector col = frames.at(i).col(n);
    for (int r = 0; r < da; ++r) v(r * de + i) = col(r);
    return v;
  };
  switch (mode) {
    case MixtureMode::pointer: {
      if (frames.frames.size() != 1)
        throw std::invalid_argument("build_mixture: pointer mode needs a single subsystem frame");
      const CMatrix& f = frames.frames.front();
      const DensityOperator env = partial_trace(DensityOperator::pure(s), da, de, Keep::environment);
      const Eigen::VectorXd w = a.rowwise().squaredNorm();
      CMatrix sub = CMatrix::Zero(da, da);
      for (int n = 0; n < da; ++n) sub += w(n) * f.col(n) * f.col(n).adjoint();
      out.mat = kron(sub, env.mat);
      break;
    }
    case MixtureMode::preferred:
      for (int n = 0; n < da; ++n) {
        CVector phi = CVector::Zero(dim);
        for (int i = 0; i < de; ++i) phi += a(n, i) * basis_vec(n, i);
        out.mat += phi * phi.adjoint();
      }
      break;
    case MixtureMode::fully_diagonal:
      for (int n = 0; n < da; ++n)
        for (int i = 0; i < de; ++i) {
          const CVector b = basis_vec(n, i);
          out.mat += std::norm(a(n, i)) * b * b.adjoint();
        }
      break;
  }
  return out;
}

DiagonalReport compare_diagonal_dynamics(const CompositeState& pure0, const FrameSet& frames,
                                         const CMatrix& evolution, int horizon, MixtureMode mode) {
  const int da = pure0.dim_a();
  const int de = pure0.dim_e();
  if (evolution.rows() != da * de) throw std::invalid_argument("compare_diagonal_dynamics: dimension mismatch");
  // columns |P_n:O_i>|O_i>, so each block is read in the frame (x) label basis
  std::vector<CMatrix> sector_basis;
  for (int n = 0; n < da; ++n) {
    CMatrix b = CMatrix::Zero(da * de, de);
    for (int i = 0; i < de; ++i)
      for (int r = 0; r < da; ++r) b(r * de + i, i) = frames.at(i)(r, n);
    sector_basis.push_back(b);
  }
  CMatrix rho = DensityOperator::pure(pure0).mat;
  CMatrix mix = build_mixture(pure0, frames, mode).mat;
  DiagonalReport rep;
  for (int step = 0; step <= horizon; ++step) {
    if (step > 0) {
      rho = evolution * rho * evolution.adjoint();
      mix = evolution * mix * evolution.adjoint();
    }
    double dev = 0.0;
    double traced = 0.0;
    for (const auto& b : sector_basis) {
      const CMatrix diff = b.adjoint() * (rho - mix) * b;
      dev = std::max(dev, diff.cwiseAbs().maxCoeff());
      traced = std::max(traced, std::abs(diff.trace()));
    }
    rep.per_step.push_back(dev);
    rep.per_step_traced.push_back(traced);
    rep.max_abs_deviation = std::max(rep.max_abs_deviation, dev);
    rep.max_traced_deviation = std::max(rep.max_traced_deviation, traced);
  }
  return rep;
}

NonPointerExpansion nonpointer_expansion(const CompositeState& state, const CMatrix& initial_frame,
                                         const CMatrix& evolution, int steps, const CMatrix& frame_t) {
  const int da = state.dim_a();
  const int de = state.dim_e();
  NonPointerExpansion out;
  out.initial = rebasis_subsystem(state, initial_frame);
  out.d.assign(static_cast<std::size_t>(da), std::vector<cd>(static_cast<std::size_t>(da), 0.0));
  out.records.assign(static_cast<std::size_t>(da), std::vector<CVector>(static_cast<std::size_t>(da)));
  out.undefined.assign(static_cast<std::size_t>(da), std::vector<bool>(static_cast<std::size_t>(da), true));
  CMatrix total = CMatrix::Zero(da, de);
  for (int n = 0; n < da; ++n) {
    const RebasisTerm& t0 = out.initial[static_cast<std::size_t>(n)];
    if (t0.undefined) {
      for (int l = 0; l < da; ++l) out.records[static_cast<std::size_t>(l)][static_cast<std::size_t>(n)] = CVector::Zero(de);
      continue;
    }
    CompositeState term;
    term.amp = t0.coeff * initial_frame.col(n) * t0.record.transpose();
    const CompositeState moved = evolve(term, evolution, steps);
    const auto parts = rebasis_subsystem(moved, frame_t);
    for (int l = 0; l < da; ++l) {
      const auto& p = parts[static_cast<std::size_t>(l)];
      out.d[static_cast<std::size_t>(l)][static_cast<std::size_t>(n)] = p.coeff;
      out.records[static_cast<std::size_t>(l)][static_cast<std::size_t>(n)] = p.record;
      out.undefined[static_cast<std::size_t>(l)][static_cast<std::size_t>(n)] = p.undefined;
      if (!p.undefined) total += p.coeff * frame_t.col(l) * p.record.transpose();
    }
  }
  const CompositeState full = evolve(state, evolution, steps);
  out.recombination_error = (total - full.amp).cwiseAbs().maxCoeff();
  return out;
}

CMatrix random_unitary(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  CMatrix z(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) z(i, j) = cd(g(rng), g(rng));
  Eigen::HouseholderQR<CMatrix> qr(z);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j) {
    const cd d = r(j, j);
    if (std::abs(d) > 0) q.col(j) *= d / std::abs(d);
  }
  return q;
}

CMatrix rotation(double theta) {
  CMatrix r(2, 2);
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

double unitarity_error(const CMatrix& u) {
  return (u.adjoint() * u - CMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
}

}  // namespace vibro::composite

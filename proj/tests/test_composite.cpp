#include <doctest.h>

#include <cmath>

#include "vibrolab/composite.hpp"

using namespace vibro::composite;

namespace {

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

CVector basis(int dim, int k) {
  CVector v = CVector::Zero(dim);
  v(k) = 1.0;
  return v;
}

// Brute-force pointer unitary: sum_n |P_n><P_n| (x) U_n.
CMatrix pointer_oracle(const CMatrix& frame, const std::vector<CMatrix>& us) {
  const auto da = frame.rows(), de = us[0].rows();
  CMatrix total = CMatrix::Zero(da * de, da * de);
  for (Eigen::Index n = 0; n < da; ++n) total += kron(frame.col(n) * frame.col(n).adjoint(), us[static_cast<std::size_t>(n)]);
  return total;
}

CMatrix ptrace_env(const CMatrix& rho, int da, int de) {
  CMatrix r = CMatrix::Zero(da, da);
  for (int a = 0; a < da; ++a)
    for (int b = 0; b < da; ++b)
      for (int e = 0; e < de; ++e) r(a, b) += rho(a * de + e, b * de + e);
  return r;
}

const double s2 = 1.0 / std::sqrt(2.0);

}  // namespace

TEST_CASE("compose places amplitudes on the product basis") {
  auto s = compose(basis(2, 0), basis(2, 0));
  CHECK(std::abs(s.amp(0, 0) - 1.0) < 1e-15);
  CHECK(s.amp.cwiseAbs().sum() == doctest::Approx(1.0));

  CVector sub(2);
  sub << s2, s2;
  s = compose(sub, basis(2, 1));
  CHECK(std::abs(s.amp(0, 1) - s2) < 1e-15);
  CHECK(std::abs(s.amp(1, 1) - s2) < 1e-15);
  CHECK(std::abs(s.amp(0, 0)) == 0.0);

  sub << 0.6, cd(0.0, 0.8);
  s = compose(sub, basis(2, 0));
  CHECK(std::abs(s.amp(1, 0) - cd(0.0, 0.8)) < 1e-15);
  CHECK(s.norm() == doctest::Approx(1.0).epsilon(1e-12));
  // flattened index a*dim_e + e
  CHECK(std::abs(s.vec()(2) - cd(0.0, 0.8)) < 1e-15);
}

TEST_CASE("rebasis of a Bell pair") {
  CompositeState bell;
  bell.amp = CMatrix::Zero(2, 2);
  bell.amp(0, 0) = s2;
  bell.amp(1, 1) = s2;
  auto t = rebasis_subsystem(bell, CMatrix::Identity(2, 2));
  CHECK(std::abs(t[0].coeff) == doctest::Approx(s2));
  CHECK(std::abs(t[1].coeff) == doctest::Approx(s2));
  CHECK((t[0].record - basis(2, 0)).norm() < 1e-14);

  t = rebasis_subsystem(bell, rotation(M_PI / 4));
  CHECK(std::abs(t[0].coeff) == doctest::Approx(s2));
  CHECK(std::abs(t[1].coeff) == doctest::Approx(s2));
  CVector plus(2), minus(2);
  plus << s2, s2;
  minus << -s2, s2;
  // records are defined up to the phase absorbed into b_l
  CHECK(std::abs(std::abs(t[0].record.dot(plus)) - 1.0) < 1e-14);
  CHECK(std::abs(std::abs(t[1].record.dot(minus)) - 1.0) < 1e-14);
  CHECK((recombine(t, rotation(M_PI / 4)).amp - bell.amp).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("entangled final state seen from the averaged-state frame") {
  const double a1 = 0.8, a2 = 0.6;
  CompositeState f;
  f.amp = CMatrix::Zero(2, 2);
  f.amp(0, 0) = a1;  // |g>|P1>
  f.amp(1, 1) = a2;  // |e>|P2>
  CMatrix frame(2, 2);
  frame << a1, -a2, a2, a1;
  const auto t = rebasis_subsystem(f, frame);
  // rows of F^dagger amp: (a1^2, a2^2) and (-a1 a2, a1 a2)
  CHECK(std::abs(t[0].coeff) == doctest::Approx(std::sqrt(a1 * a1 * a1 * a1 + a2 * a2 * a2 * a2)).epsilon(1e-13));
  CHECK(std::abs(t[1].coeff) == doctest::Approx(0.67882250993908557).epsilon(1e-13));
  CHECK(std::abs(t[1].coeff) > 0.1);
  CHECK((recombine(t, frame).amp - f.amp).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("rebasis round trip on random states") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const int da = 2 + static_cast<int>(seed % 3), de = 1 + static_cast<int>(seed % 4);
    const CMatrix u = random_unitary(da * de, seed);
    const CompositeState s = CompositeState::from_vec(u.col(0), da, de);
    const CMatrix frame = random_unitary(da, seed + 100);
    const auto t = rebasis_subsystem(s, frame);
    for (const auto& term : t)
      if (!term.undefined) CHECK(term.record.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((recombine(t, frame).amp - s.amp).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("zero branch is flagged rather than divided") {
  const CompositeState s = compose(basis(2, 0), basis(3, 1));
  const auto t = rebasis_subsystem(s, CMatrix::Identity(2, 2));
  CHECK_FALSE(t[0].undefined);
  CHECK(t[1].undefined);
  CHECK(std::abs(t[1].coeff) == 0.0);
}

TEST_CASE("schmidt coefficients") {
  CVector a(2), b(3);
  a << 0.6, 0.8;
  b << 0.0, 1.0, 0.0;
  auto sd = schmidt(compose(a, b));
  CHECK(sd.coefficients(0) == doctest::Approx(1.0));
  CHECK(sd.rank() == 1);

  CompositeState bell;
  bell.amp = CMatrix::Zero(2, 2);
  bell.amp(0, 0) = s2;
  bell.amp(1, 1) = s2;
  sd = schmidt(bell);
  CHECK(sd.coefficients(0) == doctest::Approx(s2));
  CHECK(sd.coefficients(1) == doctest::Approx(s2));

  CompositeState d;
  d.amp = CMatrix::Zero(2, 2);
  d.amp(0, 0) = 0.8;
  d.amp(1, 1) = 0.6;
  sd = schmidt(d);
  CHECK(sd.coefficients(0) == doctest::Approx(0.8));
  CHECK(sd.coefficients(1) == doctest::Approx(0.6));
  CHECK((sd.reconstruct().amp - d.amp).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("partial trace and entropy") {
  CVector a(2), b(2);
  a << 0.6, cd(0.0, 0.8);
  b << s2, s2;
  auto r = partial_trace(DensityOperator::pure(compose(a, b)), 2, 2, Keep::subsystem);
  CHECK(r.purity() == doctest::Approx(1.0));

  CompositeState bell;
  bell.amp = CMatrix::Zero(2, 2);
  bell.amp(0, 0) = s2;
  bell.amp(1, 1) = s2;
  r = partial_trace(DensityOperator::pure(bell), 2, 2, Keep::subsystem);
  CHECK((r.mat - 0.5 * CMatrix::Identity(2, 2)).norm() < 1e-14);
  CHECK(entropy(r) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  CompositeState d;
  d.amp = CMatrix::Zero(2, 3);
  d.amp(0, 0) = 0.8;
  d.amp(1, 2) = 0.6;
  r = partial_trace(DensityOperator::pure(d), 2, 3, Keep::environment);
  // -0.64 ln 0.64 - 0.36 ln 0.36
  CHECK(entropy(r) == doctest::Approx(0.65341819479370180).epsilon(1e-12));
}

TEST_CASE("entropy of the reduced state matches the Schmidt entropy") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const CompositeState s = CompositeState::from_vec(random_unitary(12, seed).col(3), 3, 4);
    const auto sd = schmidt(s);
    const Eigen::VectorXd p = sd.coefficients.cwiseAbs2();
    const double e_sub = entropy(partial_trace(DensityOperator::pure(s), 3, 4, Keep::subsystem));
    const double e_env = entropy(partial_trace(DensityOperator::pure(s), 3, 4, Keep::environment));
    CHECK(e_sub == doctest::Approx(entropy_of_weights(p)).epsilon(1e-10));
    CHECK(e_env == doctest::Approx(e_sub).epsilon(1e-10));
    CHECK(e_sub <= std::log(3.0) + 1e-12);
  }
}

TEST_CASE("density validation rejects non-physical matrices") {
  DensityOperator bad{CMatrix::Identity(2, 2)};
  CHECK_THROWS(bad.validate());
  CMatrix m(2, 2);
  m << 1.2, 0.0, 0.0, -0.2;
  CHECK_THROWS(DensityOperator{m}.validate());
  CHECK_NOTHROW(DensityOperator{0.5 * CMatrix::Identity(2, 2)}.validate());
}

TEST_CASE("pointer evolution matches the brute-force tensor assembly") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const int da = 2 + static_cast<int>(seed % 3), de = 1 + static_cast<int>(seed % 4);
    const CMatrix frame = random_unitary(da, seed);
    std::vector<CMatrix> us;
    for (int n = 0; n < da; ++n) us.push_back(random_unitary(de, 10 * seed + static_cast<std::uint64_t>(n)));
    const auto e = synthesize_pointer_evolution(frame, us);
    CHECK((e.total - pointer_oracle(frame, us)).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(unitarity_error(e.total) < 1e-12);
  }
}

TEST_CASE("controlled flip makes a Bell state and undoes it") {
  CMatrix x(2, 2);
  x << 0, 1, 1, 0;
  const auto e = synthesize_pointer_evolution(CMatrix::Identity(2, 2), {CMatrix::Identity(2, 2), x});
  CVector plus(2);
  plus << s2, s2;
  const CompositeState s0 = compose(plus, basis(2, 0));
  const CompositeState s1 = evolve(s0, e, 1);
  CHECK(std::abs(s1.amp(0, 0) - s2) < 1e-15);
  CHECK(std::abs(s1.amp(1, 1) - s2) < 1e-15);
  CHECK(schmidt(s1).rank() == 2);
  CHECK((evolve(s0, e, 2).amp - s0.amp).cwiseAbs().maxCoeff() < 1e-15);
  const auto id = synthesize_pointer_evolution(CMatrix::Identity(2, 2), {CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)});
  CHECK((evolve(s0, id, 5).amp - s0.amp).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("record overlap sets the reduced entropy") {
  const CMatrix frame = random_unitary(2, 4);
  const std::vector<CMatrix> us{random_unitary(2, 5), random_unitary(2, 6)};
  const auto e = synthesize_pointer_evolution(frame, us);
  CVector c(2), env(2);
  c << 0.8, 0.6;
  env << 1.0, 0.0;
  const CompositeState s = evolve(compose(frame * c, env), e, 1);
  // reduced state in the pointer basis: diag(0.64, 0.36) with coherence 0.48 <E1|E0>
  const cd ov = (us[1] * env).dot(us[0] * env);
  CMatrix red(2, 2);
  red << 0.64, 0.48 * ov, 0.48 * std::conj(ov), 0.36;
  const Eigen::SelfAdjointEigenSolver<CMatrix> es(red);
  double h = 0.0;
  for (int i = 0; i < 2; ++i)
    if (es.eigenvalues()(i) > 0) h -= es.eigenvalues()(i) * std::log(es.eigenvalues()(i));
  CHECK(entropy(partial_trace(DensityOperator::pure(s), 2, 2, Keep::subsystem)) == doctest::Approx(h).epsilon(1e-10));
}

TEST_CASE("pointer mixture keeps the pointer diagonals for every step") {
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const int da = 2 + static_cast<int>(seed % 3), de = 1 + static_cast<int>((seed + 1) % 4);
    const CMatrix frame = random_unitary(da, seed);
    std::vector<CMatrix> us;
    for (int n = 0; n < da; ++n) us.push_back(random_unitary(de, 7 * seed + static_cast<std::uint64_t>(n)));
    const CMatrix u = pointer_oracle(frame, us);
    // product initial state C (x) E
    const CompositeState s = compose(random_unitary(da, seed + 50).col(0), random_unitary(de, seed + 60).col(0));
    const auto rep = compare_diagonal_dynamics(s, frame, u, 120);
    CHECK(rep.per_step.size() == 121u);
    CHECK(rep.max_abs_deviation < 1e-10);
  }
}

TEST_CASE("rotated mixture frame breaks the diagonal equivalence") {
  const CMatrix frame = random_unitary(2, 3);
  const std::vector<CMatrix> us{random_unitary(3, 4), random_unitary(3, 5)};
  const CMatrix u = pointer_oracle(frame, us);
  const CMatrix rot = frame * rotation(M_PI / 4);
  CVector c(2), env(3);
  c << s2, s2;
  env << 1.0, 0.0, 0.0;
  const CompositeState s = compose(rot * c, env);
  const auto rep = compare_diagonal_dynamics(s, rot, u, 100);

  // oracle: evolve both by hand and read the diagonal in the rotated frame (x) env basis
  CMatrix rho = DensityOperator::pure(s).mat;
  CMatrix mix = CMatrix::Zero(6, 6);
  for (int l = 0; l < 2; ++l) {
    CompositeState b;
    b.amp = rot.col(l) * (rot.col(l).adjoint() * s.amp);
    mix += DensityOperator::pure(b).mat;
  }
  const CMatrix basis6 = kron(rot, CMatrix::Identity(3, 3));
  double worst = 0.0;
  for (int k = 0; k <= 100; ++k) {
    if (k > 0) {
      rho = u * rho * u.adjoint();
      mix = u * mix * u.adjoint();
    }
    const CMatrix d = basis6.adjoint() * (rho - mix) * basis6;
    worst = std::max(worst, d.diagonal().cwiseAbs().maxCoeff());
  }
  CHECK(worst > 0.01);
  CHECK(rep.max_abs_deviation == doctest::Approx(worst).epsilon(1e-9));
}

TEST_CASE("identity evolution gives zero deviation in any frame") {
  const CompositeState s = compose(random_unitary(2, 9).col(1), random_unitary(3, 8).col(0));
  const auto rep = compare_diagonal_dynamics(s, random_unitary(2, 10), CMatrix::Identity(6, 6), 10);
  CHECK(rep.max_abs_deviation < 1e-15);
}

TEST_CASE("build_mixture forms") {
  CVector plus(2);
  plus << s2, s2;
  const CompositeState s = compose(plus, basis(2, 0));
  const auto m = build_mixture(s, CMatrix::Identity(2, 2), MixtureMode::pointer);
  CMatrix expect = CMatrix::Zero(4, 4);
  expect(0, 0) = 0.5;
  expect(2, 2) = 0.5;
  CHECK((m.mat - expect).cwiseAbs().maxCoeff() < 1e-15);

  const CompositeState single = compose(basis(2, 1), plus);
  for (auto mode : {MixtureMode::pointer, MixtureMode::preferred})
    CHECK((build_mixture(single, CMatrix::Identity(2, 2), mode).mat - DensityOperator::pure(single).mat)
              .cwiseAbs()
              .maxCoeff() < 1e-15);

  // A_ni = [[.5, .5], [.5, -.5]] with identity frames
  CompositeState a;
  a.amp.resize(2, 2);
  a.amp << 0.5, 0.5, 0.5, -0.5;
  const FrameSet fs(std::vector<CMatrix>{CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)});
  const auto pref = build_mixture(a, fs, MixtureMode::preferred);
  const auto diag = build_mixture(a, fs, MixtureMode::fully_diagonal);
  // sector 0 environment coherence A_00 A_01^* = 0.25; sector 1: -0.25
  CHECK(std::abs(pref.mat(0, 1) - 0.25) < 1e-15);
  CHECK(std::abs(pref.mat(2, 3) + 0.25) < 1e-15);
  CHECK(std::abs(diag.mat(0, 1)) < 1e-15);
  CHECK(std::abs(pref.mat(0, 2)) < 1e-15);
  CHECK(pref.trace().real() == doctest::Approx(1.0));
}

TEST_CASE("preferred evolution has no sector leakage") {
  std::vector<CMatrix> frames{rotation(0.0), rotation(0.3), rotation(0.7)};
  std::vector<CMatrix> sectors{random_unitary(3, 21), random_unitary(3, 22)};
  const auto e = synthesize_preferred_evolution(frames, sectors);
  CHECK(unitarity_error(e.total) < 1e-12);
  const FrameSet fs(frames);
  const CompositeState s0 = CompositeState::from_vec(random_unitary(6, 23).col(0), 2, 3);
  const Eigen::VectorXd pop0 = sector_populations(s0, fs);
  for (int n = 0; n < 2; ++n) {
    const CMatrix p = fs.sector_projector(n, 2, 3);
    // P_n commutes with U: no amplitude leaves the sector
    CHECK(((CMatrix::Identity(6, 6) - p) * e.total * p).cwiseAbs().maxCoeff() < 1e-12);
  }
  CompositeState s = s0;
  for (int k = 0; k < 100; ++k) {
    s = evolve(s, e, 1);
    CHECK((sector_populations(s, fs) - pop0).cwiseAbs().maxCoeff() < 1e-12);
  }
  const auto pref = compare_diagonal_dynamics(s0, fs, e.total, 100, MixtureMode::preferred);
  const auto naive = compare_diagonal_dynamics(s0, fs, e.total, 100, MixtureMode::fully_diagonal);
  CHECK(pref.max_abs_deviation < 1e-10);
  CHECK(naive.max_abs_deviation > 1e-3);
}

TEST_CASE("preferred evolution with identity frames reduces to the pointer form") {
  std::vector<CMatrix> frames(3, CMatrix::Identity(2, 2));
  std::vector<CMatrix> sectors{random_unitary(3, 31), random_unitary(3, 32)};
  const auto pe = synthesize_preferred_evolution(frames, sectors);
  const auto po = synthesize_pointer_evolution(CMatrix::Identity(2, 2), sectors);
  CHECK((pe.total - po.total).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("cyclic sector map marches the environment label") {
  CMatrix shift = CMatrix::Zero(3, 3);
  shift(1, 0) = shift(2, 1) = shift(0, 2) = 1.0;
  std::vector<CMatrix> frames{rotation(0.0), rotation(0.4), rotation(0.9)};
  const auto e = synthesize_preferred_evolution(frames, {shift, CMatrix::Identity(3, 3)});
  // sector 0 at label 0: |P_0:O_0>|O_0>
  CompositeState s = compose(frames[0].col(0), basis(3, 0));
  for (int k = 1; k <= 3; ++k) {
    s = evolve(s, e, 1);
    const int label = k % 3;
    CHECK(s.amp.col(label).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(std::abs(frames[static_cast<std::size_t>(label)].col(0).dot(s.amp.col(label))) - 1.0) < 1e-12);
  }
}

TEST_CASE("non-pointer expansion") {
  const CMatrix frame = random_unitary(2, 41);
  const std::vector<CMatrix> us{random_unitary(2, 42), random_unitary(2, 43)};
  const CMatrix u = pointer_oracle(frame, us);
  CVector c(2), env(2);
  c << 0.8, 0.6;
  env << 1.0, 0.0;
  const CompositeState s = compose(frame * c, env);

  auto ex = nonpointer_expansion(s, frame, u, 5, frame);
  CHECK(ex.recombination_error < 1e-12);
  CHECK(std::abs(ex.d[0][1]) < 1e-12);
  CHECK(std::abs(ex.d[1][0]) < 1e-12);

  ex = nonpointer_expansion(s, frame, u, 5, frame * rotation(M_PI / 4));
  CHECK(ex.recombination_error < 1e-12);
  bool cross = false;
  for (int l = 0; l < 2; ++l) cross = cross || (std::abs(ex.d[l][0]) > 0.1 && std::abs(ex.d[l][1]) > 0.1);
  CHECK(cross);

  ex = nonpointer_expansion(s, frame, CMatrix::Identity(4, 4), 3, frame);
  CHECK(std::abs(std::abs(ex.d[0][0]) - 0.8) < 1e-12);
  CHECK(std::abs(std::abs(ex.d[1][1]) - 0.6) < 1e-12);
  CHECK(std::abs(ex.d[0][1]) < 1e-12);
}

TEST_CASE("random unitaries are seeded and unitary") {
  const CMatrix a = random_unitary(4, 77), b = random_unitary(4, 77), c = random_unitary(4, 78);
  CHECK((a - b).norm() == 0.0);
  CHECK((a - c).norm() > 0.1);
  CHECK(unitarity_error(a) < 1e-13);
  CHECK(unitarity_error(rotation(0.3)) < 1e-15);
}

TEST_CASE("subsystem-traced coherence matches the manual trace") {
  const CompositeState s = CompositeState::from_vec(random_unitary(8, 61).col(2), 2, 4);
  const CMatrix rho = DensityOperator::pure(s).mat;
  CHECK((partial_trace(DensityOperator{rho}, 2, 4, Keep::subsystem).mat - ptrace_env(rho, 2, 4)).cwiseAbs().maxCoeff() <
        1e-14);
}

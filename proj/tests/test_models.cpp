#include <doctest.h>

#include <cmath>

#include "vibrolab/grid.hpp"
#include "vibrolab/models.hpp"

using namespace vibro;

namespace {

// Closed-form 2x2 adiabats, independent of the library's eigen kernel.
void adiabats(const Eigen::MatrixXd& v, double& lo, double& hi) {
  const double m = 0.5 * (v(0, 0) + v(1, 1)), d = 0.5 * (v(0, 0) - v(1, 1));
  const double r = std::sqrt(d * d + v(0, 1) * v(0, 1));
  lo = m - r;
  hi = m + r;
}

double gap(const DiabaticModel& m, double x) {
  double lo = 0, hi = 0;
  adiabats(m.potential(x), lo, hi);
  return hi - lo;
}

double upper(const DiabaticModel& m, double x) {
  double lo = 0, hi = 0;
  adiabats(m.potential(x), lo, hi);
  return hi;
}

}  // namespace

TEST_CASE("grid pairing and validation") {
  const SpatialGrid g{-10.0, 10.0, 128};
  CHECK(g.dx() == doctest::Approx(20.0 / 128));
  for (std::size_t j = 0; j < g.n_points; ++j) {
    const double kd = g.k(j) * g.dx();
    CHECK(kd > -M_PI - 1e-12);
    CHECK(kd <= M_PI + 1e-12);
  }
  CHECK(g.k(1) == doctest::Approx(2 * M_PI / 20.0));
  CHECK(g.index_of(-100.0) == 0u);
  CHECK(g.index_of(100.0) == 127u);
  CHECK_THROWS((SpatialGrid{-1.0, 1.0, 32}.validate()));
  CHECK_THROWS((SpatialGrid{1.0, -1.0, 128}.validate()));
  CHECK_NOTHROW(g.validate());
}

TEST_CASE("single crossing structure") {
  const auto m = models::single_crossing();
  CHECK(m.n_states() == 2);
  CHECK(m.mass() == 2000.0);
  const auto v0 = m.potential(0.0);
  CHECK(std::abs(v0(0, 0)) < 1e-15);
  CHECK(std::abs(v0(1, 1)) < 1e-15);
  CHECK(gap(m, 0.0) == doctest::Approx(0.010).epsilon(1e-12));
  CHECK(std::abs(m.potential(30.0)(0, 1)) < 1e-100);
  CHECK(std::abs(m.potential(-30.0)(0, 1)) < 1e-100);
  for (double x : {-3.0, -0.4, 0.0, 0.7, 5.0}) {
    const auto v = m.potential(x);
    CHECK(v(0, 1) == v(1, 0));
  }
}

TEST_CASE("gradients match centered differences") {
  for (const auto& name : {"single_crossing", "dual_crossing", "surface_scattering", "linear_crossing"}) {
    const auto m = models::make(name);
    for (double x : {-4.1, -1.3, 0.2, 2.9, 5.5}) {
      const double h = 1e-5;
      const Eigen::MatrixXd fd = (m.potential(x + h) - m.potential(x - h)) / (2 * h);
      const Eigen::MatrixXd g = m.gradient(x);
      CHECK((fd - g).cwiseAbs().maxCoeff() < 1e-7 * std::max(1.0, g.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("dual crossing has two gap minima and two coupling peaks") {
  const auto m = models::dual_crossing();
  std::vector<double> minima, peaks;
  const double h = 0.001;
  auto d1 = [&](double x) {
    // mixing-angle derivative of the 2x2 problem
    const auto v = m.potential(x), dv = m.gradient(x);
    const double d = 0.5 * (v(0, 0) - v(1, 1)), dd = 0.5 * (dv(0, 0) - dv(1, 1));
    return std::abs(0.5 * (d * dv(0, 1) - dd * v(0, 1)) / (d * d + v(0, 1) * v(0, 1)));
  };
  for (double x = -8.0 + h; x < 8.0 - h; x += h) {
    if (gap(m, x) < gap(m, x - h) && gap(m, x) <= gap(m, x + h)) minima.push_back(x);
    if (d1(x) > d1(x - h) && d1(x) >= d1(x + h)) peaks.push_back(x);
  }
  REQUIRE(minima.size() == 2);
  CHECK(peaks.size() == 2);
  CHECK(minima[0] == doctest::Approx(-minima[1]).epsilon(1e-3));
  for (double x : {0.3, 1.7, 4.0}) CHECK((m.potential(x) - m.potential(-x)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("surface scattering decouples and binds on the upper adiabat") {
  const auto m = models::surface_scattering();
  models::WellInfo w;
  REQUIRE(models::find_upper_well(m, 2.0, 40.0, w));
  CHECK(w.curvature > 0.0);
  CHECK(w.energy < m.param("asymptote"));
  // finite-difference curvature at the reported minimum
  const double h = 1e-3;
  const double c = (upper(m, w.x_min + h) - 2 * upper(m, w.x_min) + upper(m, w.x_min - h)) / (h * h);
  CHECK(c == doctest::Approx(w.curvature).epsilon(1e-3));
  CHECK(std::abs(m.potential(40.0)(0, 1)) < 1e-100);

  // classical oracle: velocity Verlet on the upper adiabat, energy below the asymptote
  const double mass = m.mass();
  double x = w.x_min, p = std::sqrt(2 * mass * 0.5 * (m.param("asymptote") - w.energy));
  auto force = [&](double y) { return -(upper(m, y + 1e-6) - upper(m, y - 1e-6)) / 2e-6; };
  double xmax = x, xmin = x;
  int turns = 0;
  double f = force(x);
  for (int k = 0; k < 200000; ++k) {
    const double pold = p;
    p += 0.5 * f * 1.0;
    x += p / mass;
    f = force(x);
    p += 0.5 * f * 1.0;
    if ((pold > 0) != (p > 0)) ++turns;
    xmax = std::max(xmax, x);
    xmin = std::min(xmin, x);
  }
  CHECK(turns >= 2);
  CHECK(xmax < 30.0);
  CHECK(xmin > 2.0);
}

TEST_CASE("surface scattering rejects a coupling larger than half the gap") {
  CHECK_THROWS_AS(models::surface_scattering({{"coupling", 0.03}}), std::invalid_argument);
}

TEST_CASE("parameter validation names the offending field") {
  try {
    models::single_crossing({{"mass", -1.0}});
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("mass") != std::string::npos);
  }
  CHECK_THROWS(models::single_crossing({{"bogus", 1.0}}));
  CHECK_THROWS(models::make("no_such_model"));
  CHECK(models::make("single_crossing", {{"C", 0.01}}).param("C") == 0.01);
}

TEST_CASE("registry lists every constructible model") {
  const auto reg = models::registry();
  CHECK(reg.size() >= 6);
  for (const auto& info : reg) {
    const auto m = models::make(info.name);
    CHECK(m.name() == info.name);
    CHECK(m.mass() > 0.0);
    const auto v = m.potential(0.37);
    CHECK((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("diagonal and constant models") {
  const auto d = models::diagonal();
  CHECK(d.potential(3.0)(0, 1) == 0.0);
  CHECK(gap(d, 3.0) == doctest::Approx(0.02));
  const auto c = models::constant_coupling({{"bias", 0.003}, {"coupling", 0.004}});
  double lo = 0, hi = 0;
  adiabats(c.potential(-7.0), lo, hi);
  CHECK(lo == doctest::Approx(-0.005).epsilon(1e-12));
  CHECK(hi == doctest::Approx(0.005).epsilon(1e-12));
}

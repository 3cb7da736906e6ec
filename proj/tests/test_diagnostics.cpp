#include <doctest.h>

#include <cmath>

#include "vibrolab/diagnostics.hpp"

using namespace vibro;

namespace {

std::vector<double> sampled(double (*f)(double), double a, double b, int n) {
  std::vector<double> y;
  for (int i = 0; i < n; ++i) y.push_back(f(a + (b - a) * i / (n - 1)));
  return y;
}

double sine(double x) { return std::sin(x); }

}  // namespace

TEST_CASE("entropy of electronic densities") {
  Eigen::MatrixXcd pure(2, 2);
  pure << 0.5, 0.5, 0.5, 0.5;
  auto r = diag::entanglement_from_density(pure);
  CHECK(r.entropy == 0.0);
  CHECK(r.rank_eps == 1);
  CHECK(r.branch_overlaps(0, 1) == doctest::Approx(1.0));

  Eigen::MatrixXcd mixed = Eigen::MatrixXcd::Identity(2, 2) * 0.5;
  r = diag::entanglement_from_density(mixed);
  CHECK(r.entropy == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(r.rank_eps == 2);
  CHECK(r.schmidt_coefficients[0] == doctest::Approx(std::sqrt(0.5)));

  // unnormalized input and an off-diagonal coherence
  Eigen::MatrixXcd rho(2, 2);
  rho << 1.2, cd(0.3, 0.2), cd(0.3, -0.2), 0.8;
  r = diag::entanglement_from_density(rho);
  const double t = 2.0, d = 0.2 / t, c = std::abs(cd(0.3, 0.2)) / t;
  const double l1 = 0.5 + std::sqrt(d * d + c * c), l2 = 1.0 - l1;
  CHECK(r.entropy == doctest::Approx(-l1 * std::log(l1) - l2 * std::log(l2)).epsilon(1e-12));
  CHECK(r.schmidt_coefficients[0] >= r.schmidt_coefficients[1]);
  CHECK_THROWS(diag::entanglement_from_density(Eigen::MatrixXcd::Zero(2, 2)));
}

TEST_CASE("vibronic entropy of a product packet and of displaced branches") {
  const SpatialGrid g{-30, 30, 1024};
  const auto s = bo::build(models::single_crossing(), g);
  auto w = exact::gaussian_packet(g, 2, exact::PacketSpec{-10.0, 5.0, 1.0, 0, {cd(0.6), cd(0.8)}},
                                  Representation::adiabatic);
  // identical conditionals: electronic state is pure
  CHECK(diag::vibronic_entropy(w, s).entropy < 1e-10);
  // move the upper branch far away: the branches decohere and the entropy is that of the weights
  const auto far = exact::gaussian_packet(g, 2, exact::PacketSpec{10.0, 5.0, 1.0, 0, {}}, Representation::adiabatic);
  for (std::size_t i = 0; i < g.n_points; ++i) w.at(1, i) = 0.8 * far.at(0, i);
  const double expect = -0.36 * std::log(0.36) - 0.64 * std::log(0.64);
  CHECK(diag::vibronic_entropy(w, s).entropy == doctest::Approx(expect).epsilon(1e-10));
  w.psi[0] += 1.0;
  CHECK_THROWS(diag::vibronic_entropy(w, s));
}

TEST_CASE("diagonal deviation series") {
  std::vector<exact::Observation> ex(3);
  std::vector<mqc::EnsembleSample> mx(3);
  for (int k = 0; k < 3; ++k) {
    ex[k].time = mx[k].time = 10.0 * k;
    ex[k].rho_el = Eigen::MatrixXcd::Identity(2, 2) * 0.5;
    ex[k].rho_el(0, 1) = ex[k].rho_el(1, 0) = 0.5;
    mx[k].rho_el = Eigen::MatrixXcd::Identity(2, 2) * 0.5;
  }
  const auto id = diag::diagonal_deviation_series(ex, mx, Eigen::MatrixXcd::Identity(2, 2), 0.01);
  CHECK(id.max_deviation < 1e-15);
  CHECK(id.tolerance == 0.01);
  Eigen::MatrixXcd h(2, 2);
  h << 1, 1, 1, -1;
  h /= std::sqrt(2.0);
  const auto rot = diag::diagonal_deviation_series(ex, mx, h, 0.01);
  CHECK(rot.max_deviation == doctest::Approx(0.5));
  CHECK(rot.deviation.size() == 3);
  mx[1].time = 11.0;
  CHECK_THROWS(diag::diagonal_deviation_series(ex, mx, h, 0.01));
  mx.pop_back();
  CHECK_THROWS(diag::diagonal_deviation_series(ex, mx, h, 0.01));
}

TEST_CASE("smoothing and oscillation counting") {
  const std::vector<double> y{1, 2, 3, 10};
  const auto s = diag::smooth3(y);
  CHECK(s[0] == 1);
  CHECK(s[1] == doctest::Approx(2.0));
  CHECK(s[2] == doctest::Approx(5.0));
  CHECK(s[3] == 10);

  CHECK(diag::oscillation_metrics(sampled(sine, 0.0, 2.5 * M_PI, 40), 0.05).extrema == 2);
  CHECK(diag::oscillation_metrics(sampled(sine, 0.0, 4.5 * M_PI, 80), 0.05).extrema == 4);
  CHECK(diag::oscillation_metrics(sampled(sine, -1.4, 1.4, 30), 0.05).extrema == 0);
  // wiggles under the threshold are not extrema
  std::vector<double> flat;
  for (int i = 0; i < 30; ++i) flat.push_back(0.3 + 0.002 * ((i % 2) ? 1 : -1));
  const auto mf = diag::oscillation_metrics(flat, diag::kDeterministicNoise);
  CHECK(mf.extrema == 0);
  CHECK(mf.amplitude <= 0.004 + 1e-15);
  const auto ms = diag::oscillation_metrics(sampled(sine, 0.0, 2.5 * M_PI, 400), 0.05);
  CHECK(ms.amplitude == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("pearson correlation") {
  const std::vector<double> a{1, 2, 3, 4}, b{2, 4, 6, 8}, c{4, 3, 2, 1}, k{5, 5, 5, 5};
  CHECK(diag::pearson(a, b) == doctest::Approx(1.0));
  CHECK(diag::pearson(a, c) == doctest::Approx(-1.0));
  CHECK(diag::pearson(a, k) == 0.0);
  CHECK(diag::pearson(a, {1, 2}) == 0.0);
}

TEST_CASE("scan analysis skips failed points and sets noise floors") {
  diag::ScanResult scan;
  scan.values = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  scan.channel_names = {"a"};
  scan.focus_channel = 0;
  diag::SchemeCurve ex{"exact"}, fs{"fssh"};
  for (double v : scan.values) {
    ex.probabilities.push_back({0.5 + 0.3 * std::sin(v)});
    fs.probabilities.push_back({0.5 + 0.3 * std::sin(v) + 0.01});
    ex.ok.push_back(1);
    fs.ok.push_back(v != 5);
    fs.std_error.push_back(0.01);
  }
  fs.probabilities[4] = {5.0};  // a failed point must not enter the metrics
  scan.curves = {ex, fs};
  diag::analyze_scan(scan);
  const auto* e = scan.find("exact");
  const auto* f = scan.find("fssh");
  REQUIRE(e != nullptr);
  REQUIRE(f != nullptr);
  CHECK(scan.find("mixture") == nullptr);
  CHECK(e->noise == diag::kDeterministicNoise);
  CHECK(f->noise == doctest::Approx(0.03));
  CHECK(e->correlation == doctest::Approx(1.0));
  CHECK(f->correlation == doctest::Approx(1.0));
  CHECK(e->metrics.extrema >= 2);
  CHECK(f->metrics.amplitude < 1.0);
}

TEST_CASE("scan helpers") {
  const auto p = diag::stueckelberg_params();
  const auto m = models::dual_crossing(p);
  // diabats cross where E0 = A exp(-B x^2)
  const auto v = m.potential(10.0);
  CHECK(std::abs(v(0, 0) - v(1, 1)) < 1e-12);
  const auto ch = diag::default_scan_channels(SpatialGrid{-64, 64, 2048});
  CHECK(ch.size() == 4);
  CHECK(ch[3].name == "upper_transmitted");

  const SpatialGrid g{-20, 20, 256};
  CHECK(diag::single_branch(exact::gaussian_packet(g, 2, exact::PacketSpec{0, 0, 1, 1, {}}, Representation::adiabatic)));
  CHECK_FALSE(diag::single_branch(
      exact::gaussian_packet(g, 2, exact::PacketSpec{0, 0, 1, 0, {cd(0.6), cd(0.8)}}, Representation::adiabatic)));
}

TEST_CASE("witness needs two separated windows") {
  diag::WitnessSettings ws;
  // the stock dual crossing has one merged window
  ws.scan.model_params = {};
  const auto r = diag::reinterference_witness(ws);
  CHECK_FALSE(r.applicable);
  CHECK(r.reason == "fewer than two coupling windows");
}

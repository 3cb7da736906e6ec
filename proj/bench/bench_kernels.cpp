// Serial reference kernels against their OpenMP versions.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "vibrolab/kernels.hpp"

using namespace vibro::kernels;

namespace {

std::vector<cd> field(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<cd> v(n);
  for (auto& z : v) z = cd(g(rng), g(rng));
  return v;
}

Exec mode(const benchmark::State& s) { return s.range(1) == 0 ? Exec::serial : Exec::parallel; }

void BM_point_sym2(benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  auto psi = field(2 * n, 1);
  std::vector<cd> u(3 * n);
  for (std::size_t i = 0; i < n; ++i) sym2_propagator(0.01 * i / n, -0.01, 0.005, 0.5, &u[3 * i]);
  for (auto _ : s) {
    apply_point_sym2(psi.data(), n, u.data(), mode(s));
    benchmark::DoNotOptimize(psi.data());
  }
  s.SetItemsProcessed(s.iterations() * static_cast<long>(n));
}

void BM_point_matrices(benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  const int ns = 3;
  auto psi = field(ns * n, 2);
  auto mats = field(ns * ns * n, 3);
  for (auto _ : s) {
    apply_point_matrices(psi.data(), ns, n, mats.data(), mode(s));
    benchmark::DoNotOptimize(psi.data());
  }
  s.SetItemsProcessed(s.iterations() * static_cast<long>(n));
}

void BM_real_frames(benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  auto psi = field(2 * n, 4);
  std::vector<double> frames(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    double lo = 0, hi = 0;
    sym2_eigen(0.01, -0.01, 0.001 * i / n, lo, hi, &frames[4 * i]);
  }
  bool back = false;
  for (auto _ : s) {
    apply_real_frames(psi.data(), 2, n, frames.data(), back, mode(s));
    back = !back;
    benchmark::DoNotOptimize(psi.data());
  }
  s.SetItemsProcessed(s.iterations() * static_cast<long>(n));
}

void BM_multiply_rows(benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  auto psi = field(2 * n, 5);
  std::vector<cd> phase(n);
  for (std::size_t i = 0; i < n; ++i) phase[i] = std::polar(1.0, 0.001 * static_cast<double>(i));
  for (auto _ : s) {
    multiply_rows(psi.data(), 2, n, phase.data(), mode(s));
    benchmark::DoNotOptimize(psi.data());
  }
  s.SetItemsProcessed(s.iterations() * static_cast<long>(n));
}

void sizes(benchmark::internal::Benchmark* b) {
  for (long n : {1024L, 16384L, 262144L})
    for (long m : {0L, 1L}) b->Args({n, m});
  b->ArgNames({"points", "omp"});
}

}  // namespace

BENCHMARK(BM_point_sym2)->Apply(sizes);
BENCHMARK(BM_point_matrices)->Apply(sizes);
BENCHMARK(BM_real_frames)->Apply(sizes);
BENCHMARK(BM_multiply_rows)->Apply(sizes);

BENCHMARK_MAIN();

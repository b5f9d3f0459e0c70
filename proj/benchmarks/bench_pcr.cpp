// Single-rank PCR on acyclic systems: factorization cost and prefactored solve throughput.
#include <benchmark/benchmark.h>

#include <random>

#include "cbsolve/banded.hpp"

namespace {

using cbsolve::BandedMatrix;
using cbsolve::Dense;

BandedMatrix diagonally_dominant(std::size_t n, std::size_t r, bool cyclic) {
  std::vector<double> stencil(2 * r + 1, 0.25);
  stencil[r] = 1.0 + 0.5 * static_cast<double>(r);
  return BandedMatrix::uniform(n, stencil, cyclic);
}

Dense random_rhs(std::size_t n, std::size_t m) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dense b(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m; ++c) b(i, c) = u(rng);
  }
  return b;
}

void BM_PcrFactor(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto r = static_cast<std::size_t>(state.range(1));
  const BandedMatrix a = diagonally_dominant(n, r, false);
  for (auto _ : state) {
    cbsolve::PcrFactor f(a);
    benchmark::DoNotOptimize(f.stages());
  }
}
BENCHMARK(BM_PcrFactor)->ArgsProduct({{256, 1024, 4096}, {1, 2}});

void BM_PcrSolve(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto m = static_cast<std::size_t>(state.range(1));
  const cbsolve::PcrFactor f(diagonally_dominant(n, 1, false));
  const Dense b = random_rhs(n, m);
  for (auto _ : state) {
    Dense x = f.solve(b);
    benchmark::DoNotOptimize(x);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * m));
}
BENCHMARK(BM_PcrSolve)->ArgsProduct({{256, 1024, 4096}, {1, 16, 256}});

}  // namespace

BENCHMARK_MAIN();

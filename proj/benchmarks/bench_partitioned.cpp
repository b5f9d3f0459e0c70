// Partitioned solve over simulated ranks: one factorization, timed solves.
#include <benchmark/benchmark.h>

#include <memory>
#include <random>
#include <vector>

#include "cbsolve/partition.hpp"
#include "cbsolve/solver.hpp"
#include "cbsolve/transport.hpp"

namespace {

using namespace cbsolve;

void run_partitioned(benchmark::State& state, ExecutionMode mode) {
  const auto p = static_cast<std::size_t>(state.range(0));
  const std::size_t n = 1024;
  const std::size_t m = 64;
  const double stencil[3] = {1.0 / 3.0, 1.0, 1.0 / 3.0};
  const BandedMatrix a = BandedMatrix::uniform(n, stencil, true);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Dense b(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < m; ++c) b(i, c) = u(rng);
  }
  const PartitionLayout layout = PartitionLayout::equal(n, p, 1, true);
  const auto locals = split_global(a, b, layout);

  World world(p, mode);
  std::vector<std::unique_ptr<PartitionedSolver>> solvers(p);
  world.run([&](Communicator& comm) {
    solvers[comm.rank()] = std::make_unique<PartitionedSolver>(comm, locals[comm.rank()].blocks, true);
  });
  std::vector<Dense> parts(p);
  for (auto _ : state) {
    world.run([&](Communicator& comm) { parts[comm.rank()] = solvers[comm.rank()]->solve(comm, locals[comm.rank()].rhs); });
    benchmark::DoNotOptimize(parts);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * m));
}

void BM_PartitionedLockstep(benchmark::State& state) { run_partitioned(state, ExecutionMode::lockstep); }
void BM_PartitionedConcurrent(benchmark::State& state) { run_partitioned(state, ExecutionMode::concurrent); }

BENCHMARK(BM_PartitionedLockstep)->DenseRange(1, 8)->UseRealTime();
BENCHMARK(BM_PartitionedConcurrent)->DenseRange(1, 8)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();

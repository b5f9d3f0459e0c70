// Compact derivative along each axis of a cubic periodic field.
#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "cbsolve/compactfd.hpp"
#include "cbsolve/transport.hpp"

namespace {

using namespace cbsolve;

void BM_CollocatedDerivative(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const int axis = static_cast<int>(state.range(1));
  const double h = 2.0 * std::numbers::pi / static_cast<double>(n);
  Field3 f({n, n, n});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) f(i, j, k) = std::sin(h * (i + 2.0 * j + 3.0 * k));
    }
  }
  SelfCommunicator self;
  const CompactOperator op(self, SchemeSpec::make(SchemeKind::collocated_d1_6, h),
                           PartitionLayout::equal(n, 1, 1, true));
  for (auto _ : state) {
    Field3 d = op.apply(self, f, axis);
    benchmark::DoNotOptimize(d);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_CollocatedDerivative)->ArgsProduct({{16, 32, 64}, {0, 1, 2}});

}  // namespace

BENCHMARK_MAIN();

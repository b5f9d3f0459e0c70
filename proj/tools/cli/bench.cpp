#include "bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <ostream>

#include "cbsolve/banded.hpp"
#include "cbsolve/errors.hpp"
#include "cbsolve/partition.hpp"
#include "cbsolve/reduced.hpp"
#include "cbsolve/solver.hpp"
#include "cbsolve/transport.hpp"
#include "textio.hpp"

namespace cbsolve::cli {

namespace {

constexpr double kStencil[3] = {1.0 / 3.0, 1.0, 1.0 / 3.0};

// Smooth, non-trivial right-hand sides; column j is a different mode.
RhsBatch bench_rhs(std::size_t n, std::size_t m) {
  RhsBatch b(n, m);
  const double step = 2.0 * M_PI / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) b(i, j) = std::sin(static_cast<double>((j + 1) * i) * step + 0.1 * j);
  }
  return b;
}

double max_relative_residual(const BandedMatrix& a, const RhsBatch& x, const RhsBatch& b) {
  const auto res = residual_inf(a, x, b);
  double worst = 0.0;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    double scale = 0.0;
    for (std::size_t i = 0; i < b.rows(); ++i) scale = std::max(scale, std::abs(b(i, j)));
    worst = std::max(worst, res[j] / std::max(scale, 1e-300));
  }
  return worst;
}

BenchRecord measure(const BenchOptions& options, std::size_t p) {
  const std::size_t n = options.mode == ScalingMode::strong ? options.n0 : p * options.n0;
  const PartitionLayout layout = PartitionLayout::equal(n, p, 1, true);
  const BandedMatrix a = BandedMatrix::uniform(n, kStencil, true);
  const RhsBatch b = bench_rhs(n, options.batch);
  const std::vector<LocalSystem> locals = split_global(a, b, layout);

  World world(p, ExecutionMode::concurrent);
  std::vector<std::unique_ptr<PartitionedSolver>> solvers(p);
  world.run([&](Communicator& comm) {
    const RankId me = comm.rank();
    solvers[me] = std::make_unique<PartitionedSolver>(comm, locals[me].blocks, true);
  });

  world.reset_counters();
  std::vector<Dense> parts(p);
  world.run([&](Communicator& comm) { parts[comm.rank()] = solvers[comm.rank()]->solve(comm, locals[comm.rank()].rhs); });
  const Counters counted = world.total_counters();
  const double residual = max_relative_residual(a, gather_rows(parts), b);
  if (!(residual <= kBenchResidualLimit)) {
    throw Error("bench solve at p=" + std::to_string(p) + " has relative residual " + format_double(residual));
  }

  const auto start = std::chrono::steady_clock::now();
  world.run([&](Communicator& comm) {
    const RankId me = comm.rank();
    for (std::size_t k = 0; k < options.reps; ++k) parts[me] = solvers[me]->solve(comm, locals[me].rhs);
  });
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  const DetachSchedule schedule = build_schedule(p, true);
  BenchRecord rec;
  rec.mode = options.mode;
  rec.p = p;
  rec.n = n;
  rec.batch = options.batch;
  rec.wall_seconds = elapsed.count() / static_cast<double>(options.reps);
  rec.pcr_stages = schedule.pcr_stages;
  rec.detach_stages = schedule.detach_stages;
  rec.messages = counted.messages_sent;
  rec.bytes = counted.bytes_sent;
  return rec;
}

}  // namespace

ScalingMode parse_scaling_mode(const std::string& text) {
  if (text == "strong") return ScalingMode::strong;
  if (text == "weak") return ScalingMode::weak;
  throw InvalidArgument("unknown scaling mode '" + text + "'");
}

const char* to_string(ScalingMode mode) { return mode == ScalingMode::strong ? "strong" : "weak"; }

double strong_speedup(double t1, double tp) { return t1 / tp; }

double weak_speedup(std::size_t p, double t1, double tp) { return static_cast<double>(p) * t1 / tp; }

std::vector<BenchRecord> run_bench(const BenchOptions& options) {
  if (options.ranks.empty()) throw InvalidArgument("no rank counts given");
  if (options.batch == 0 || options.reps == 0 || options.n0 == 0) {
    throw InvalidArgument("n0, batch and reps must be positive");
  }
  std::vector<std::size_t> ranks = options.ranks;
  if (std::find(ranks.begin(), ranks.end(), 0u) != ranks.end()) throw InvalidArgument("rank counts must be >= 1");
  ranks.push_back(1);
  std::sort(ranks.begin(), ranks.end());
  ranks.erase(std::unique(ranks.begin(), ranks.end()), ranks.end());

  // Validate every layout before spending time on measurements.
  for (const std::size_t p : ranks) {
    const std::size_t n = options.mode == ScalingMode::strong ? options.n0 : p * options.n0;
    if (n < 2 * p) {
      throw InvalidArgument("n = " + std::to_string(n) + " over p = " + std::to_string(p) +
                            " leaves fewer than one interior row per rank");
    }
  }

  std::vector<BenchRecord> records;
  for (const std::size_t p : ranks) records.push_back(measure(options, p));
  const double t1 = records.front().wall_seconds;
  for (auto& rec : records) {
    rec.speedup = rec.mode == ScalingMode::strong ? strong_speedup(t1, rec.wall_seconds)
                                                  : weak_speedup(rec.p, t1, rec.wall_seconds);
  }
  return records;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
  out << "mode,p,n,batch,wall_seconds,pcr_stages,detach_stages,messages,bytes,speedup\n";
  for (const auto& r : records) {
    out << to_string(r.mode) << ',' << r.p << ',' << r.n << ',' << r.batch << ',' << format_double(r.wall_seconds) << ','
        << r.pcr_stages << ',' << r.detach_stages << ',' << r.messages << ',' << r.bytes << ','
        << format_double(r.speedup) << '\n';
  }
}

}  // namespace cbsolve::cli

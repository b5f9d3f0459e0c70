#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cbsolve::cli {

enum class ScalingMode { strong, weak };

ScalingMode parse_scaling_mode(const std::string& text);
const char* to_string(ScalingMode mode);

struct BenchOptions {
  ScalingMode mode = ScalingMode::strong;
  std::vector<std::size_t> ranks{1, 2, 4, 8};
  std::size_t n0 = 1024;  // global rows (strong) or rows per rank (weak)
  std::size_t batch = 16;
  std::size_t reps = 10;
};

/// One CSV row. n is the global system size.
struct BenchRecord {
  ScalingMode mode = ScalingMode::strong;
  std::size_t p = 1;
  std::size_t n = 0;
  std::size_t batch = 0;
  double wall_seconds = 0.0;  // mean per solve
  std::size_t pcr_stages = 0;
  std::size_t detach_stages = 0;
  std::uint64_t messages = 0;  // one solve, all ranks
  std::uint64_t bytes = 0;
  double speedup = 0.0;
};

inline constexpr double kBenchResidualLimit = 1e-12;

/// Cyclic B[1/3, 1, 1/3] solves in a concurrent world, pre-factorized once
/// per rank count. p = 1 is always measured since every speedup refers to it;
/// rows come out sorted by p.
///
/// strong: S = T1 / Tp at fixed n = n0. weak: S = p * T1 / Tp with n = p * n0.
/// Throws InvalidArgument for a rank count that leaves fewer than r interior
/// rows on a rank, and Error if a solve misses kBenchResidualLimit.
std::vector<BenchRecord> run_bench(const BenchOptions& options);

/// Strong-scaling speedup of p=1 time `t1` versus `tp`.
double strong_speedup(double t1, double tp);
double weak_speedup(std::size_t p, double t1, double tp);

void write_bench_csv(std::ostream& out, const std::vector<BenchRecord>& records);

}  // namespace cbsolve::cli

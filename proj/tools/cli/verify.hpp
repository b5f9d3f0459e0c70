#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace cbsolve::cli {

struct VerifyOptions {
  std::uint64_t seed = 1;
  std::vector<std::size_t> sizes{64};  // global rows of the random oracle systems
};

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // suite-specific metric, reported for the record
  std::string first_failure;

  bool passed() const noexcept { return failures == 0; }
};

struct VerifyReport {
  std::vector<SuiteResult> suites;

  bool passed() const noexcept;
};

/// Runs the oracle, p-independence, schedule, convergence and sparsity
/// suites. Every world runs in lockstep mode, so the report depends only on
/// the options.
VerifyReport run_verify(const VerifyOptions& options);

/// CSV table: suite,cases,failures,status,worst,first_failure.
void write_verify_report(std::ostream& out, const VerifyReport& report);

}  // namespace cbsolve::cli

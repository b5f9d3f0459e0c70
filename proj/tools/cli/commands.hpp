#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "bench.hpp"
#include "cbsolve/tgv.hpp"
#include "verify.hpp"

namespace cbsolve::cli {

struct SolveArgs {
  std::string matrix;
  std::string rhs;
  std::string out = "-";  // "-" writes to the output stream
  std::size_t ranks = 1;
};

struct TgvArgs {
  std::size_t n = 32;
  std::size_t steps = 10;
  std::size_t ranks = 1;
  std::string out = "-";
};

struct TgvRow {
  std::size_t step = 0;
  double time = 0.0;
  FlowDiagnostics diag;
};

/// Taylor-Green run over `ranks` slabs; one row per completed step.
std::vector<TgvRow> run_tgv(const TgvArgs& args);
void write_tgv_csv(std::ostream& out, const std::vector<TgvRow>& rows);

// Each command reports failures on `err` and returns the process exit code.
int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err);
int cmd_bench(const BenchOptions& options, std::ostream& out, std::ostream& err);
int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err);
int cmd_tgv(const TgvArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cbsolve::cli

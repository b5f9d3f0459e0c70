#include "commands.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "cbsolve/errors.hpp"
#include "cbsolve/solver.hpp"
#include "textio.hpp"

namespace cbsolve::cli {

namespace {

// Runs `write` against the named file, or `fallback` for "-".
void with_output(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& write) {
  if (path == "-") {
    write(fallback);
    return;
  }
  std::ofstream file(path);
  if (!file) throw InvalidArgument("cannot open '" + path + "' for writing");
  write(file);
  if (!file) throw Error("failed writing '" + path + "'");
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const ParseError*>(&e)) return "parse error";
  if (dynamic_cast<const SingularPivot*>(&e)) return "singular pivot";
  if (dynamic_cast<const DimensionMismatch*>(&e)) return "dimension mismatch";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid argument";
  if (dynamic_cast<const NonPhysicalState*>(&e)) return "non-physical state";
  return "error";
}

int report(std::ostream& err, const char* command, const std::exception& e) {
  err << "cbsolve " << command << ": " << error_kind(e) << ": " << e.what() << '\n';
  return 1;
}

}  // namespace

std::vector<TgvRow> run_tgv(const TgvArgs& args) {
  if (args.ranks == 0) throw InvalidArgument("ranks must be >= 1");
  const FlowConfig config;
  std::vector<TgvRow> rows(args.steps);
  World world(args.ranks, ExecutionMode::lockstep);
  world.run([&](Communicator& comm) {
    FlowSolver solver(comm, config, args.n);
    FlowState state = solver.initial_state();
    double time = 0.0;
    for (std::size_t s = 0; s < args.steps; ++s) {
      const double dt = solver.stable_dt(state);
      state = solver.rk4_step(state, dt);
      time += dt;
      const FlowDiagnostics diag = solver.diagnostics(state);
      if (comm.rank() == 0) rows[s] = TgvRow{s + 1, time, diag};
    }
  });
  return rows;
}

void write_tgv_csv(std::ostream& out, const std::vector<TgvRow>& rows) {
  out << "step,time,mass,momentum_x,momentum_y,momentum_z,total_energy,kinetic_energy,enstrophy\n";
  for (const auto& r : rows) {
    out << r.step << ',' << format_double(r.time) << ',' << format_double(r.diag.mass);
    for (const double m : r.diag.momentum) out << ',' << format_double(m);
    out << ',' << format_double(r.diag.total_energy) << ',' << format_double(r.diag.kinetic_energy) << ','
        << format_double(r.diag.enstrophy) << '\n';
  }
}

int cmd_verify(const VerifyOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const VerifyReport rep = run_verify(options);
    write_verify_report(out, rep);
    if (rep.passed()) return 0;
    for (const auto& s : rep.suites) {
      if (!s.passed()) err << "cbsolve verify: suite " << s.name << " failed: " << s.first_failure << '\n';
    }
    return 1;
  } catch (const std::exception& e) {
    return report(err, "verify", e);
  }
}

int cmd_bench(const BenchOptions& options, std::ostream& out, std::ostream& err) {
  try {
    write_bench_csv(out, run_bench(options));
    return 0;
  } catch (const std::exception& e) {
    return report(err, "bench", e);
  }
}

int cmd_solve(const SolveArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const BandedMatrix a = read_matrix_file(args.matrix);
    const RhsBatch b = read_rhs_file(args.rhs);
    if (b.rows() != a.size()) {
      throw DimensionMismatch("rhs has " + std::to_string(b.rows()) + " rows, matrix has " + std::to_string(a.size()));
    }
    if (args.ranks == 0) throw InvalidArgument("ranks must be >= 1");
    World world(args.ranks, ExecutionMode::lockstep);
    const RhsBatch x =
        solve_in_world(world, a, b, PartitionLayout::equal(a.size(), args.ranks, a.half_width(), a.cyclic()));
    with_output(args.out, out, [&](std::ostream& o) { write_rhs(o, x); });
    return 0;
  } catch (const std::exception& e) {
    return report(err, "solve", e);
  }
}

int cmd_tgv(const TgvArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto rows = run_tgv(args);
    with_output(args.out, out, [&](std::ostream& o) { write_tgv_csv(o, rows); });
    return 0;
  } catch (const std::exception& e) {
    return report(err, "tgv", e);
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Partitioned solver for compact banded systems"};
  app.require_subcommand(1);

  VerifyOptions verify;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle and invariant suites");
  verify_cmd->add_option("--seed", verify.seed, "Random seed");
  verify_cmd->add_option("--sizes", verify.sizes, "Global sizes of the random systems")->delimiter(',');

  BenchOptions bench;
  std::string mode = "strong";
  auto* bench_cmd = app.add_subcommand("bench", "Strong or weak scaling of the pre-factorized solve");
  bench_cmd->add_option("--mode", mode, "strong or weak")->check(CLI::IsMember({"strong", "weak"}));
  bench_cmd->add_option("--ranks", bench.ranks, "Rank counts")->delimiter(',');
  bench_cmd->add_option("--n0", bench.n0, "Global rows (strong) or rows per rank (weak)");
  bench_cmd->add_option("--batch", bench.batch, "Right-hand sides per solve");
  bench_cmd->add_option("--reps", bench.reps, "Timed solves per rank count");

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Solve a system read from files");
  solve_cmd->add_option("--matrix", solve.matrix, "Matrix file")->required();
  solve_cmd->add_option("--rhs", solve.rhs, "Right-hand side file")->required();
  solve_cmd->add_option("--ranks", solve.ranks, "Simulated ranks");
  solve_cmd->add_option("--out", solve.out, "Output file, - for stdout");

  TgvArgs tgv;
  auto* tgv_cmd = app.add_subcommand("tgv", "Run the Taylor-Green vortex");
  tgv_cmd->add_option("--n", tgv.n, "Grid points per direction");
  tgv_cmd->add_option("--steps", tgv.steps, "RK4 steps");
  tgv_cmd->add_option("--ranks", tgv.ranks, "Simulated ranks");
  tgv_cmd->add_option("--out", tgv.out, "CSV file, - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  if (*verify_cmd) return cmd_verify(verify, out, err);
  if (*bench_cmd) {
    bench.mode = parse_scaling_mode(mode);
    return cmd_bench(bench, out, err);
  }
  if (*solve_cmd) return cmd_solve(solve, out, err);
  return cmd_tgv(tgv, out, err);
}

}  // namespace cbsolve::cli

#include "verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <random>
#include <sstream>

#include "cbsolve/banded.hpp"
#include "cbsolve/compactfd.hpp"
#include "cbsolve/dense.hpp"
#include "cbsolve/errors.hpp"
#include "cbsolve/partition.hpp"
#include "cbsolve/reduced.hpp"
#include "cbsolve/solver.hpp"
#include "cbsolve/transport.hpp"

namespace cbsolve::cli {

namespace {

const std::vector<std::size_t> kOracleRanks{1, 2, 3, 4, 5, 7, 8, 11, 16};
constexpr std::size_t kOracleBatch = 8;
constexpr double kResidualLimit = 1e-12;
constexpr double kDeviationLimit = 1e-11;
constexpr double kAgreementLimit = 1e-12;
constexpr double kOrderLow = 5.5;
constexpr double kOrderHigh = 6.5;
constexpr double kConstantDerivativeLimit = 1e-13;
constexpr double kConstantInterpLimit = 1e-14;

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

std::string csv_field(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  return text;
}

class Suite {
 public:
  explicit Suite(std::string name) { result_.name = std::move(name); }

  void check(bool ok, double metric, const std::function<std::string()>& describe) {
    ++result_.cases;
    result_.worst = std::max(result_.worst, metric);
    if (!ok && result_.failures++ == 0) result_.first_failure = describe();
  }
  void fail(const std::string& what) {
    ++result_.cases;
    if (result_.failures++ == 0) result_.first_failure = what;
  }

  SuiteResult finish() { return std::move(result_); }

 private:
  SuiteResult result_;
};

// Off-diagonals in [-1, 1], diagonal of magnitude at least 1.5x the row's
// off-diagonal sum.
BandedMatrix random_dominant(std::size_t n, std::size_t r, bool cyclic, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(-1.0, 1.0);
  std::uniform_real_distribution<double> extra(0.5, 1.5);
  BandedMatrix a(n, 2 * r + 1, cyclic);
  const int ri = static_cast<int>(r);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int t = -ri; t <= ri; ++t) {
      if (t == 0 || !a.column(i, t)) continue;
      a.band(t, i) = off(rng);
      sum += std::abs(a.band(t, i));
    }
    a.band(0, i) = (off(rng) < 0 ? -1.0 : 1.0) * (1.5 * sum + extra(rng));
  }
  return a;
}

RhsBatch random_rhs(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  RhsBatch b(n, m);
  for (double& v : b.values()) v = val(rng);
  return b;
}

double relative_residual(const BandedMatrix& a, const RhsBatch& x, const RhsBatch& b) {
  const auto res = residual_inf(a, x, b);
  double worst = 0.0;
  for (std::size_t j = 0; j < b.cols(); ++j) {
    double scale = 0.0;
    for (std::size_t i = 0; i < b.rows(); ++i) scale = std::max(scale, std::abs(b(i, j)));
    worst = std::max(worst, res[j] / std::max(scale, 1e-300));
  }
  return worst;
}

std::string case_name(std::uint64_t seed, std::size_t n, std::size_t p, std::size_t r, bool cyclic) {
  std::ostringstream s;
  s << "seed=" << seed << " n=" << n << " p=" << p << " r=" << r << " cyclic=" << (cyclic ? 1 : 0);
  return s.str();
}

void oracle_suites(const VerifyOptions& options, std::vector<SuiteResult>& out) {
  Suite oracle("oracle");
  Suite agreement("p_independence");
  for (const std::size_t n : options.sizes) {
    for (const std::size_t r : {1u, 2u}) {
      for (const bool cyclic : {true, false}) {
        std::seed_seq seq{options.seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r),
                          static_cast<std::uint64_t>(cyclic)};
        std::mt19937_64 rng(seq);
        if (n < 2 * r + 1) continue;
        const BandedMatrix a = random_dominant(n, r, cyclic, rng);
        const RhsBatch b = random_rhs(n, kOracleBatch, rng);
        const Dense reference = dense_solve(a.to_dense(), b);
        std::vector<std::pair<std::size_t, RhsBatch>> solved;
        for (const std::size_t p : kOracleRanks) {
          if (n < 2 * r * p) continue;
          const std::string name = case_name(options.seed, n, p, r, cyclic);
          try {
            World world(p, ExecutionMode::lockstep);
            const RhsBatch x = solve_in_world(world, a, b, PartitionLayout::equal(n, p, r, cyclic));
            const double res = relative_residual(a, x, b);
            const double dev = max_abs_diff(x, reference);
            oracle.check(res <= kResidualLimit && dev <= kDeviationLimit, std::max(res, dev),
                         [&] { return name + " residual=" + sci(res) + " deviation=" + sci(dev); });
            solved.emplace_back(p, x);
          } catch (const Error& e) {
            oracle.fail(name + ": " + e.what());
          }
        }
        for (std::size_t i = 0; i < solved.size(); ++i) {
          for (std::size_t j = i + 1; j < solved.size(); ++j) {
            const double d = max_abs_diff(solved[i].second, solved[j].second);
            agreement.check(d <= kAgreementLimit, d, [&] {
              return case_name(options.seed, n, solved[i].first, r, cyclic) + " vs p=" +
                     std::to_string(solved[j].first) + " differ by " + sci(d);
            });
          }
        }
      }
    }
  }
  out.push_back(oracle.finish());
  out.push_back(agreement.finish());
}

std::size_t floor_log2(std::size_t p) {
  std::size_t k = 0;
  while ((p >> (k + 1)) != 0) ++k;
  return k;
}

std::size_t ceil_log2(std::size_t p) {
  std::size_t k = 0;
  while ((std::size_t{1} << k) < p) ++k;
  return k;
}

struct StageCounts {
  std::size_t pcr = 0;
  std::size_t detach = 0;
  std::size_t detached_rows = 0;
};

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

// Stage and detach counts read back from the transport trace of a real solve.
StageCounts instrumented_counts(std::size_t p, bool cyclic) {
  const std::size_t n = 2 * p + 2;
  const double stencil[3] = {0.25, 1.0, 0.25};
  const BandedMatrix a = BandedMatrix::uniform(n, stencil, cyclic);
  World world(p, ExecutionMode::lockstep);
  solve_in_world(world, a, RhsBatch(n, 1, 1.0), PartitionLayout::equal(n, p, 1, cyclic));
  StageCounts c;
  for (const auto& ev : world.trace(0)) {
    if (ev.kind != TraceEvent::Kind::barrier) continue;
    if (starts_with(ev.stage, "reduced:pcr:")) ++c.pcr;
    if (starts_with(ev.stage, "reduced:detach:")) ++c.detach;
  }
  std::size_t reattach_receives = 0;
  for (RankId q = 0; q < p; ++q) {
    for (const auto& ev : world.trace(q)) {
      if (ev.kind == TraceEvent::Kind::recv && starts_with(ev.stage, "reduced:reattach:")) ++reattach_receives;
    }
  }
  c.detached_rows = reattach_receives / 2;  // each detached row hears from both neighbors
  return c;
}

SuiteResult schedule_suite() {
  Suite suite("schedule");
  for (const bool cyclic : {true, false}) {
    for (std::size_t p = 1; p <= 64; ++p) {
      StageCounts expect;
      if (cyclic) {
        const std::size_t k = floor_log2(p);
        expect.pcr = k;
        expect.detached_rows = p - (std::size_t{1} << k);
        std::size_t bits = 0;
        for (std::size_t e = 0; e <= k; ++e) bits += (p >> e) % 2;
        expect.detach = bits - 1;
      } else {
        expect.pcr = ceil_log2(p);
      }
      try {
        const DetachSchedule s = build_schedule(p, cyclic);
        const StageCounts got = instrumented_counts(p, cyclic);
        const bool ok = s.pcr_stages == expect.pcr && s.detach_stages == expect.detach &&
                        s.detached_rows == expect.detached_rows && got.pcr == expect.pcr &&
                        got.detach == expect.detach && got.detached_rows == expect.detached_rows;
        suite.check(ok, 0.0, [&] {
          std::ostringstream o;
          o << "p=" << p << " cyclic=" << cyclic << " expected (" << expect.pcr << "," << expect.detached_rows << ","
            << expect.detach << ") got (" << got.pcr << "," << got.detached_rows << "," << got.detach << ")";
          return o.str();
        });
      } catch (const Error& e) {
        suite.fail("p=" + std::to_string(p) + ": " + e.what());
      }
    }
  }
  return suite.finish();
}

struct SchemeCase {
  const char* name;
  SchemeKind kind;
  StaggerDirection direction;
  bool derivative;
};

const SchemeCase kSchemes[] = {
    {"collocated_d1", SchemeKind::collocated_d1_6, StaggerDirection::to_staggered, true},
    {"staggered_d1_to_stag", SchemeKind::staggered_d1_6, StaggerDirection::to_staggered, true},
    {"staggered_d1_to_coll", SchemeKind::staggered_d1_6, StaggerDirection::to_collocated, true},
    {"interp_to_stag", SchemeKind::staggered_interp_6, StaggerDirection::to_staggered, false},
    {"interp_to_coll", SchemeKind::staggered_interp_6, StaggerDirection::to_collocated, false},
};

// Input and output sample shifts, in grid spacings.
std::pair<double, double> sample_shifts(const SchemeCase& sc) {
  if (sc.kind == SchemeKind::collocated_d1_6) return {0.0, 0.0};
  return sc.direction == StaggerDirection::to_staggered ? std::pair{0.0, 0.5} : std::pair{0.5, 0.0};
}

// Max error of the scheme applied on n points over p ranks to f; `exact`
// gives the expected output.
double scheme_error(const SchemeCase& sc, std::size_t n, std::size_t p, const std::function<double(double)>& f,
                    const std::function<double(double)>& exact) {
  const double h = 2.0 * M_PI / static_cast<double>(n);
  const auto [in_shift, out_shift] = sample_shifts(sc);
  const PartitionLayout layout = PartitionLayout::equal(n, p, 1, true);
  const SchemeSpec spec = SchemeSpec::make(sc.kind, h, sc.direction);
  std::vector<double> err(p, 0.0);
  World world(p, ExecutionMode::lockstep);
  world.run([&](Communicator& comm) {
    const RankId me = comm.rank();
    const std::size_t rows = layout.local_rows(me);
    const std::size_t first = layout.offset(me);
    Field3 in({rows, 1, 1});
    for (std::size_t i = 0; i < rows; ++i) in(i, 0, 0) = f((static_cast<double>(first + i) + in_shift) * h);
    const Field3 out = derivative(in, 0, spec, layout, comm);
    for (std::size_t i = 0; i < rows; ++i) {
      const double e = std::abs(out(i, 0, 0) - exact((static_cast<double>(first + i) + out_shift) * h));
      err[me] = std::max(err[me], e);
    }
  });
  return *std::max_element(err.begin(), err.end());
}

SuiteResult convergence_suite() {
  Suite suite("convergence");
  constexpr double c = 1.7;
  for (const auto& sc : kSchemes) {
    const auto f = [](double x) { return std::sin(x); };
    const auto exact = [&sc](double x) { return sc.derivative ? std::cos(x) : std::sin(x); };
    for (const std::size_t p : {1u, 4u}) {
      const std::string where = std::string(sc.name) + " p=" + std::to_string(p);
      try {
        const double e32 = scheme_error(sc, 32, p, f, exact);
        const double e64 = scheme_error(sc, 64, p, f, exact);
        const double order = std::log2(e32 / e64);
        suite.check(order >= kOrderLow && order <= kOrderHigh, 0.0,
                    [&] { return where + " order=" + sci(order) + " e32=" + sci(e32) + " e64=" + sci(e64); });
        const auto constant = [](double) { return c; };
        const auto zero = [](double) { return 0.0; };
        const double ec = sc.derivative ? scheme_error(sc, 32, p, constant, zero)
                                        : scheme_error(sc, 32, p, constant, constant) / c;
        const double limit = sc.derivative ? kConstantDerivativeLimit : kConstantInterpLimit;
        suite.check(ec <= limit, ec, [&] { return where + " constant field error=" + sci(ec); });
      } catch (const Error& e) {
        suite.fail(where + ": " + e.what());
      }
    }
  }
  return suite.finish();
}

SuiteResult sparsity_suite(std::uint64_t seed) {
  Suite suite("sparsity");
  constexpr std::size_t m = 8;
  for (const std::size_t r : {1u, 2u}) {
    for (const bool cyclic : {true, false}) {
      for (const std::size_t p : {2u, 3u, 5u, 8u}) {
        const std::size_t n = 8 * p;
        std::seed_seq seq{seed, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(r), std::uint64_t{7}};
        std::mt19937_64 rng(seq);
        const BandedMatrix a = random_dominant(n, r, cyclic, rng);
        const RhsBatch b = random_rhs(n, m, rng);
        const std::string name = case_name(seed, n, p, r, cyclic);
        try {
          World world(p, ExecutionMode::lockstep);
          solve_in_world(world, a, b, PartitionLayout::equal(n, p, r, cyclic));
          for (RankId q = 0; q < p; ++q) {
            std::size_t sends = 0;
            bool shape_ok = true;
            std::uint64_t traced_values = 0;
            for (const auto& ev : world.trace(q)) {
              if (ev.kind != TraceEvent::Kind::send) continue;
              traced_values += ev.rows * ev.cols;
              if (ev.stage != "assemble") continue;
              ++sends;
              shape_ok = shape_ok && ev.peer == (q + 1) % p && ev.rows == r && ev.cols == 2 * r + m;
            }
            const std::size_t expected_sends = (cyclic || q + 1 < p) ? 1 : 0;
            const Counters& cnt = world.counters(q);
            const bool counters_ok = cnt.values_sent == traced_values && cnt.bytes_sent == 8 * traced_values;
            suite.check(sends == expected_sends && shape_ok && counters_ok, 0.0, [&] {
              return name + " rank " + std::to_string(q) + ": " + std::to_string(sends) +
                     " assembly sends, expected " + std::to_string(expected_sends) + " of " + std::to_string(r) +
                     "x" + std::to_string(2 * r + m);
            });
          }
        } catch (const Error& e) {
          suite.fail(name + ": " + e.what());
        }
      }
    }
  }
  return suite.finish();
}

}  // namespace

bool VerifyReport::passed() const noexcept {
  return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed(); });
}

VerifyReport run_verify(const VerifyOptions& options) {
  if (options.sizes.empty()) throw InvalidArgument("no sizes given");
  VerifyReport report;
  oracle_suites(options, report.suites);
  report.suites.push_back(schedule_suite());
  report.suites.push_back(convergence_suite());
  report.suites.push_back(sparsity_suite(options.seed));
  return report;
}

void write_verify_report(std::ostream& out, const VerifyReport& report) {
  out << "suite,cases,failures,status,worst,first_failure\n";
  for (const auto& s : report.suites) {
    out << s.name << ',' << s.cases << ',' << s.failures << ',' << (s.passed() ? "pass" : "FAIL") << ',' << sci(s.worst)
        << ',' << csv_field(s.first_failure) << '\n';
  }
}

}  // namespace cbsolve::cli

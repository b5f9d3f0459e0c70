#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cbsolve/errors.hpp"
#include "cli/bench.hpp"
#include "cli/commands.hpp"
#include "cli/textio.hpp"
#include "support/oracle.hpp"

using namespace cbsolve;
using namespace cbsolve::cli;

namespace {

const std::string kData = CBSOLVE_DATA_DIR;

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

int run(std::vector<const char*> args, std::string& out, std::string& err) {
  args.insert(args.begin(), "cbsolve");
  std::ostringstream o, e;
  const int code = run_cli(static_cast<int>(args.size()), args.data(), o, e);
  out = o.str();
  err = e.str();
  return code;
}

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / ("cbsolve_test_" + name);
  std::ofstream(path) << contents;
  return path;
}

}  // namespace

TEST(TextIo, MatrixRoundTrip) {
  std::istringstream in("# comment\n\nbanded 5 3 0\n0 1 2 3 4\n5 6 7 8 9\n1 2 3 4 0\n");
  const BandedMatrix a = read_matrix(in);
  EXPECT_EQ(a.size(), 5u);
  EXPECT_FALSE(a.cyclic());
  EXPECT_EQ(a.band(-1, 2), 2.0);
  EXPECT_EQ(a.band(1, 3), 4.0);
  std::ostringstream out;
  write_matrix(out, a);
  std::istringstream again(out.str());
  EXPECT_EQ(read_matrix(again).to_dense(), a.to_dense());
}

TEST(TextIo, RhsRoundTripIsExact) {
  RhsBatch b(2, 2);
  b(0, 0) = 0.1;
  b(0, 1) = -1e-300;
  b(1, 0) = 1.0 / 3.0;
  b(1, 1) = 12345.678;
  std::ostringstream out;
  write_rhs(out, b);
  std::istringstream in(out.str());
  EXPECT_EQ(read_rhs(in), b);
}

TEST(TextIo, ErrorsCarryLineNumbers) {
  const struct {
    const char* text;
    std::size_t line;
  } cases[] = {
      {"matrix 5 3 1\n", 1},
      {"banded 5 4 1\n", 1},
      {"banded 5 3 maybe\n", 1},
      {"# c\nbanded 5 3 1\n1 1 1 1 1\n1 1 1 1\n1 1 1 1 1\n", 4},
      {"banded 5 3 1\n1 1 1 1 1\n1 1 x 1 1\n1 1 1 1 1\n", 3},
      {"banded 5 3 1\n1 1 1 1 1\n1 1 1 1 1\n", 4},
      {"banded 5 3 1\n1 1 1 1 1\n1 1 1 1 1\n1 1 1 1 1\n9\n", 5},
  };
  for (const auto& c : cases) {
    std::istringstream in(c.text);
    try {
      read_matrix(in);
      ADD_FAILURE() << "accepted: " << c.text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), c.line) << c.text << " -> " << e.what();
    }
  }
  std::istringstream rhs("rhs 2 2\n1 2\n3\n");
  EXPECT_THROW(read_rhs(rhs), ParseError);
}

TEST(SolveCommand, SampleMatchesShippedExpectation) {
  std::ifstream expected_file(kData + "/sample_expected.txt");
  const RhsBatch expected = read_rhs(expected_file);
  for (const char* ranks : {"1", "2", "3", "4"}) {
    std::string out, err;
    ASSERT_EQ(run({"solve", "--matrix", (kData + "/sample_matrix.txt").c_str(), "--rhs",
                   (kData + "/sample_rhs.txt").c_str(), "--ranks", ranks},
                  out, err),
              0)
        << err;
    std::istringstream in(out);
    EXPECT_LE(oracle::max_diff(read_rhs(in), expected), 1e-12) << "ranks=" << ranks;
  }
}

TEST(SolveCommand, WritesOutputFile) {
  const auto path = std::filesystem::temp_directory_path() / "cbsolve_test_solution.txt";
  std::string out, err;
  ASSERT_EQ(run({"solve", "--matrix", (kData + "/sample_matrix.txt").c_str(), "--rhs",
                 (kData + "/sample_rhs.txt").c_str(), "--out", path.c_str()},
                out, err),
            0);
  EXPECT_TRUE(out.empty());
  EXPECT_EQ(read_rhs_file(path.string()).rows(), 8u);
  std::filesystem::remove(path);
}

TEST(SolveCommand, SingularSystemIsReported) {
  const auto m = temp_file("singular.txt", "banded 6 3 1\n1 1 1 1 1 1\n0 0 0 0 0 0\n1 1 1 1 1 1\n");
  const auto b = temp_file("singular_rhs.txt", "rhs 6 1\n1\n1\n1\n1\n1\n1\n");
  std::string out, err;
  EXPECT_NE(run({"solve", "--matrix", m.c_str(), "--rhs", b.c_str(), "--ranks", "2"}, out, err), 0);
  EXPECT_NE(err.find("singular pivot"), std::string::npos) << err;
}

TEST(SolveCommand, MalformedHeaderIsReported) {
  const auto m = temp_file("bad_header.txt", "banded eight 3 1\n");
  std::string out, err;
  EXPECT_NE(run({"solve", "--matrix", m.c_str(), "--rhs", (kData + "/sample_rhs.txt").c_str()}, out, err), 0);
  EXPECT_NE(err.find("parse error"), std::string::npos) << err;
  EXPECT_NE(err.find("line 1"), std::string::npos) << err;
}

TEST(SolveCommand, MissingFileAndBadArguments) {
  std::string out, err;
  EXPECT_NE(run({"solve", "--matrix", "/nonexistent/m.txt", "--rhs", "/nonexistent/b.txt"}, out, err), 0);
  EXPECT_NE(run({"solve"}, out, err), 0);
  EXPECT_NE(run({"frobnicate"}, out, err), 0);
  EXPECT_NE(run({}, out, err), 0);
}

TEST(TgvCommand, TenStepsConserveMass) {
  std::string out, err;
  ASSERT_EQ(run({"tgv", "--n", "32", "--steps", "10"}, out, err), 0) << err;
  const auto rows = parse_csv(out);
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"step", "time", "mass", "momentum_x", "momentum_y", "momentum_z",
                                               "total_energy", "kinetic_energy", "enstrophy"}));
  const double mass0 = std::stod(rows[1][2]);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(std::stoul(rows[i][0]), i);
    EXPECT_NEAR(std::stod(rows[i][2]), mass0, 1e-11 * mass0);
  }
}

TEST(TgvCommand, RejectsSmallGrids) {
  std::string out, err;
  EXPECT_NE(run({"tgv", "--n", "8", "--steps", "1"}, out, err), 0);
  EXPECT_FALSE(err.empty());
}

TEST(BenchCommand, WeakScalingStageColumns) {
  std::string out, err;
  ASSERT_EQ(run({"bench", "--mode", "weak", "--ranks", "1,2,4,7,8", "--n0", "64", "--batch", "16", "--reps", "2"},
                out, err),
            0)
      << err;
  const auto rows = parse_csv(out);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"mode", "p", "n", "batch", "wall_seconds", "pcr_stages",
                                               "detach_stages", "messages", "bytes", "speedup"}));
  const std::size_t pcr[] = {0, 1, 2, 2, 3};
  const std::size_t detach[] = {0, 0, 0, 2, 0};
  const double t1 = std::strtod(rows[1][4].c_str(), nullptr);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][0], "weak");
    const std::size_t p = std::stoul(rows[i][1]);
    EXPECT_EQ(std::stoul(rows[i][2]), 64 * p);
    EXPECT_EQ(std::stoul(rows[i][5]), pcr[i - 1]);
    EXPECT_EQ(std::stoul(rows[i][6]), detach[i - 1]);
    const double tp = std::strtod(rows[i][4].c_str(), nullptr);
    EXPECT_EQ(std::strtod(rows[i][9].c_str(), nullptr), static_cast<double>(p) * t1 / tp);
  }
}

TEST(BenchCommand, StrongScalingAddsBaselineAndRecomputes) {
  BenchOptions o;
  o.mode = ScalingMode::strong;
  o.ranks = {3, 2};
  o.n0 = 96;
  o.batch = 4;
  o.reps = 2;
  const auto records = run_bench(o);
  ASSERT_EQ(records.size(), 3u);
  EXPECT_EQ(records[0].p, 1u);
  EXPECT_EQ(records[0].messages, 0u);
  for (const auto& r : records) {
    EXPECT_EQ(r.n, 96u);
    EXPECT_EQ(r.speedup, records[0].wall_seconds / r.wall_seconds);
  }
  std::ostringstream csv;
  write_bench_csv(csv, records);
  const auto rows = parse_csv(csv.str());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double t1 = std::strtod(rows[1][4].c_str(), nullptr);
    const double tp = std::strtod(rows[i][4].c_str(), nullptr);
    EXPECT_EQ(std::strtod(rows[i][9].c_str(), nullptr), t1 / tp);
  }
}

TEST(BenchCommand, InvalidRankCountsFail) {
  std::string out, err;
  EXPECT_NE(run({"bench", "--ranks", "0"}, out, err), 0);
  EXPECT_NE(run({"bench", "--ranks", "64", "--n0", "100"}, out, err), 0);
  EXPECT_NE(run({"bench", "--mode", "sideways"}, out, err), 0);
}

TEST(VerifyCommand, DefaultRunPassesAndIsReproducible) {
  std::string out1, out2, err;
  ASSERT_EQ(run({"verify", "--seed", "3"}, out1, err), 0) << out1 << err;
  ASSERT_EQ(run({"verify", "--seed", "3"}, out2, err), 0);
  EXPECT_EQ(out1, out2);
  const auto rows = parse_csv(out1);
  ASSERT_EQ(rows.size(), 6u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][3], "pass") << rows[i][0];
}

TEST(VerifyCommand, CustomSizes) {
  std::string out, err;
  EXPECT_EQ(run({"verify", "--sizes", "40,71"}, out, err), 0) << out;
}

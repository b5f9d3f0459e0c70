#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cbsolve/banded.hpp"
#include "cbsolve/errors.hpp"
#include "support/oracle.hpp"

using namespace cbsolve;

namespace {

const double kThird[3] = {1.0 / 3.0, 1.0, 1.0 / 3.0};

std::size_t ceil_log2(std::size_t n) {
  std::size_t k = 0;
  while ((std::size_t{1} << k) < n) ++k;
  return k;
}

}  // namespace

TEST(BandedMatrix, RejectsBadShapes) {
  EXPECT_THROW(BandedMatrix(8, 4, true), InvalidArgument);
  EXPECT_THROW(BandedMatrix(8, 1, false), InvalidArgument);
  EXPECT_THROW(BandedMatrix(4, 5, true), InvalidArgument);
  EXPECT_NO_THROW(BandedMatrix(2, 5, false));
}

TEST(BandedMatrix, AcyclicOutOfRangeEntriesMustBeZero) {
  std::vector<std::vector<double>> bands{{1, 1, 1}, {2, 2, 2}, {1, 1, 0}};
  EXPECT_THROW(BandedMatrix::from_bands(bands, false), InvalidArgument);
  bands[0][0] = 0.0;
  EXPECT_NO_THROW(BandedMatrix::from_bands(bands, false));
}

TEST(BandedMatrix, UniformExpandsToExpectedDense) {
  const BandedMatrix c = BandedMatrix::uniform(5, kThird, true);
  const auto dense = oracle::expand(c);
  EXPECT_DOUBLE_EQ(static_cast<double>(dense[0][4]), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(static_cast<double>(dense[4][0]), 1.0 / 3.0);
  const BandedMatrix a = BandedMatrix::uniform(5, kThird, false);
  EXPECT_EQ(a.band(-1, 0), 0.0);
  EXPECT_EQ(a.band(1, 4), 0.0);
  const Dense d = a.to_dense();
  const auto e = oracle::expand(a);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(d(i, j), static_cast<double>(e[i][j]));
  }
}

TEST(ReductionCoeffs, UniformTridiagonalInteriorRow) {
  const auto k = compute_reduction_coeffs(BandedMatrix::uniform(8, kThird, false), 3, 1);
  ASSERT_EQ(k.minus.size(), 1u);
  EXPECT_DOUBLE_EQ(k.minus[0], 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(k.plus[0], 1.0 / 3.0);
}

TEST(ReductionCoeffs, AcyclicFirstRowHasNoLeftNeighbor) {
  const auto k = compute_reduction_coeffs(BandedMatrix::uniform(8, kThird, false), 0, 1);
  EXPECT_EQ(k.minus[0], 0.0);
  EXPECT_DOUBLE_EQ(k.plus[0], 1.0 / 3.0);
}

TEST(ReductionCoeffs, PentadiagonalWithEmptyOuterBandsReducesToTridiagonal) {
  const double stencil[5] = {0.0, 1.0 / 3.0, 1.0, 1.0 / 3.0, 0.0};
  const auto k = compute_reduction_coeffs(BandedMatrix::uniform(12, stencil, false), 6, 1);
  ASSERT_EQ(k.minus.size(), 2u);
  EXPECT_NEAR(k.minus[1], 0.0, 1e-15);
  EXPECT_NEAR(k.plus[1], 0.0, 1e-15);
  EXPECT_NEAR(k.minus[0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(k.plus[0], 1.0 / 3.0, 1e-15);
}

// Row combination with the returned coefficients must vanish at every odd
// offset; checked on the expanded matrix.
TEST(ReductionCoeffs, EliminateOddOffsets) {
  std::mt19937_64 rng(3);
  for (const std::size_t r : {1u, 2u}) {
    const std::size_t n = 19;
    const BandedMatrix a = oracle::random_banded(n, r, false, rng);
    const auto full = oracle::expand(a);
    const long long ri = static_cast<long long>(r);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = compute_reduction_coeffs(a, i, 1);
      std::vector<long double> comb(full[i].begin(), full[i].end());
      double scale = 0.0;
      for (const auto v : full[i]) scale = std::max(scale, std::abs(static_cast<double>(v)));
      for (long long j = 1; j <= ri; ++j) {
        const long long lo = static_cast<long long>(i) - j, hi = static_cast<long long>(i) + j;
        for (std::size_t c = 0; c < n; ++c) {
          if (lo >= 0) comb[c] -= k.minus[static_cast<std::size_t>(j - 1)] * full[static_cast<std::size_t>(lo)][c];
          if (hi < static_cast<long long>(n)) comb[c] -= k.plus[static_cast<std::size_t>(j - 1)] * full[static_cast<std::size_t>(hi)][c];
        }
        if (lo < 0) {
          EXPECT_EQ(k.minus[static_cast<std::size_t>(j - 1)], 0.0);
        }
        if (hi >= static_cast<long long>(n)) {
          EXPECT_EQ(k.plus[static_cast<std::size_t>(j - 1)], 0.0);
        }
      }
      for (long long t = -2 * ri - 1; t <= 2 * ri + 1; t += 2) {
        const long long c = static_cast<long long>(i) + t;
        if (c < 0 || c >= static_cast<long long>(n)) continue;
        EXPECT_LE(std::abs(static_cast<double>(comb[static_cast<std::size_t>(c)])), 1e-13 * scale)
            << "r=" << r << " row=" << i << " offset=" << t;
      }
    }
  }
}

TEST(PcrFullSolve, IdentityIsExact) {
  const double id[3] = {0.0, 1.0, 0.0};
  std::mt19937_64 rng(1);
  const Dense b = oracle::random_dense(9, 3, rng);
  EXPECT_EQ(pcr_full_solve(BandedMatrix::uniform(9, id, false), b), b);
}

TEST(PcrFullSolve, RecoversAllOnes) {
  const BandedMatrix a = BandedMatrix::uniform(8, kThird, false);
  const Dense ones(8, 1, 1.0);
  const Dense x = pcr_full_solve(a, matvec(a, ones));
  EXPECT_LE(oracle::max_diff(x, ones), 1e-13);
}

TEST(PcrFullSolve, RandomPentadiagonalMatchesReference) {
  std::mt19937_64 rng(13);
  const BandedMatrix a = oracle::random_banded(13, 2, false, rng);
  const Dense b = oracle::random_dense(13, 4, rng);
  const Dense x = pcr_full_solve(a, b);
  const Dense ref = oracle::reference_solve(a, b);
  EXPECT_LE(oracle::max_diff(x, ref) / std::max(1.0, ref.max_abs()), 1e-12);
}

TEST(PcrFullSolve, SweepAgainstReference) {
  std::mt19937_64 rng(21);
  for (std::size_t n = 4; n <= 64; ++n) {
    for (const std::size_t r : {1u, 2u}) {
      for (const std::size_t m : {1u, 8u}) {
        const BandedMatrix a = oracle::random_banded(n, r, false, rng);
        const Dense b = oracle::random_dense(n, m, rng);
        const Dense x = pcr_full_solve(a, b);
        ASSERT_LE(oracle::relative_residual(oracle::expand(a), x, b), 1e-12) << "n=" << n << " r=" << r;
        const auto res = residual_inf(a, x, b);
        for (const double v : res) ASSERT_LE(v, 1e-12);
      }
    }
  }
}

// Late stages leave the outer bands near roundoff; the outer cancellation
// equations must still be solvable.
TEST(PcrFullSolve, LongPentadiagonalSystems) {
  std::mt19937_64 rng(5);
  for (const std::size_t n : {128u, 300u, 1024u}) {
    for (const double d : {1.7, 2.0, 3.0}) {
      const double stencil[5] = {0.25, 0.25, d, 0.25, 0.25};
      const BandedMatrix a = BandedMatrix::uniform(n, stencil, false);
      const Dense b = oracle::random_dense(n, 3, rng);
      const Dense x = pcr_full_solve(a, b);
      EXPECT_LE(oracle::relative_residual(oracle::expand(a), x, b), 1e-12) << "n=" << n << " d=" << d;
    }
    const BandedMatrix a = oracle::random_banded(n, 2, false, rng);
    const Dense b = oracle::random_dense(n, 2, rng);
    EXPECT_LE(oracle::relative_residual(oracle::expand(a), pcr_full_solve(a, b), b), 1e-12) << "random n=" << n;
  }
}

TEST(PcrFactor, StageCountIsCeilLog2) {
  for (std::size_t n = 1; n <= 70; ++n) {
    const BandedMatrix a = BandedMatrix::uniform(std::max<std::size_t>(n, 1), kThird, false);
    EXPECT_EQ(PcrFactor(a).stages(), ceil_log2(n)) << "n=" << n;
  }
}

TEST(PcrFactor, RepeatedSolvesReuseFactorization) {
  std::mt19937_64 rng(8);
  const BandedMatrix a = oracle::random_banded(23, 2, false, rng);
  const PcrFactor f(a);
  for (int k = 0; k < 3; ++k) {
    const Dense b = oracle::random_dense(23, 2, rng);
    EXPECT_EQ(f.solve(b), pcr_full_solve(a, b));
  }
}

// Each intermediate system must still be satisfied by the solution of the
// original one.
TEST(PcrTrace, EveryStagePreservesTheSolution) {
  std::mt19937_64 rng(4);
  for (const std::size_t n : {8u, 11u, 16u}) {
    for (const std::size_t r : {1u, 2u}) {
      const BandedMatrix a = oracle::random_banded(n, r, false, rng);
      const Dense b = oracle::random_dense(n, 2, rng);
      const Dense x = oracle::reference_solve(a, b);
      const auto stages = pcr_trace(a, b);
      ASSERT_EQ(stages.size(), ceil_log2(n) + 1);
      for (const auto& st : stages) {
        const int ri = static_cast<int>(st.system.half_width());
        for (std::size_t k = 0; k < n; ++k) {
          for (std::size_t c = 0; c < b.cols(); ++c) {
            double lhs = 0.0;
            for (int t = -ri; t <= ri; ++t) {
              const long long col = static_cast<long long>(k) + static_cast<long long>(t) * static_cast<long long>(st.stride);
              if (col < 0 || col >= static_cast<long long>(n)) {
                EXPECT_EQ(st.system.band(t, k), 0.0);
                continue;
              }
              lhs += st.system.band(t, k) * x(static_cast<std::size_t>(col), c);
            }
            EXPECT_NEAR(lhs, st.rhs(k, c), 1e-12) << "n=" << n << " stride=" << st.stride << " row=" << k;
          }
        }
      }
    }
  }
}

TEST(PcrFullSolve, BatchEqualsColumnByColumnBitwise) {
  std::mt19937_64 rng(17);
  const BandedMatrix a = oracle::random_banded(29, 2, false, rng);
  const Dense b = oracle::random_dense(29, 5, rng);
  const Dense x = pcr_full_solve(a, b);
  for (std::size_t j = 0; j < 5; ++j) {
    const Dense xj = pcr_full_solve(a, b.block(0, j, 29, 1));
    for (std::size_t i = 0; i < 29; ++i) EXPECT_EQ(x(i, j), xj(i, 0));
  }
}

TEST(PcrFullSolve, ZeroPivotThrows) {
  const double stencil[3] = {1.0, 0.0, 1.0};
  EXPECT_THROW(pcr_full_solve(BandedMatrix::uniform(6, stencil, false), Dense(6, 1, 1.0)), SingularPivot);
}

TEST(PcrFullSolve, RejectsCyclicInput) {
  EXPECT_THROW(pcr_full_solve(BandedMatrix::uniform(6, kThird, true), Dense(6, 1, 1.0)), InvalidArgument);
}

TEST(Matvec, CyclicRowSums) {
  const Dense y = matvec(BandedMatrix::uniform(10, kThird, true), Dense(10, 2, 1.0));
  for (const double v : y.values()) EXPECT_DOUBLE_EQ(v, 5.0 / 3.0);
}

TEST(Matvec, IdentityAndMismatch) {
  const double id[3] = {0.0, 1.0, 0.0};
  const BandedMatrix a = BandedMatrix::uniform(4, id, true);
  const Dense x{{1}, {2}, {3}, {4}};
  EXPECT_EQ(matvec(a, x), x);
  EXPECT_THROW(matvec(a, Dense(5, 1)), DimensionMismatch);
}

TEST(Matvec, MatchesExpandedProduct) {
  std::mt19937_64 rng(9);
  for (const bool cyclic : {true, false}) {
    const BandedMatrix a = oracle::random_banded(12, 2, cyclic, rng);
    const Dense x = oracle::random_dense(12, 3, rng);
    const auto full = oracle::expand(a);
    const Dense y = matvec(a, x);
    for (std::size_t i = 0; i < 12; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        long double s = 0.0L;
        for (std::size_t j = 0; j < 12; ++j) s += full[i][j] * x(j, c);
        EXPECT_NEAR(y(i, c), static_cast<double>(s), 1e-14);
      }
    }
  }
}

TEST(ResidualInf, ScalesByRhsNorm) {
  const double id[3] = {0.0, 1.0, 0.0};
  const BandedMatrix a = BandedMatrix::uniform(3, id, false);
  const auto res = residual_inf(a, Dense{{1}, {1}, {1}}, Dense{{4}, {1}, {1}});
  EXPECT_DOUBLE_EQ(res[0], 0.75);
}

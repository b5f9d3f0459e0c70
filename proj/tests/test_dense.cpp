#include <gtest/gtest.h>

#include <random>

#include "cbsolve/dense.hpp"
#include "cbsolve/errors.hpp"
#include "support/oracle.hpp"

using namespace cbsolve;

TEST(DenseSolve, SymmetricTwoByTwo) {
  const Dense x = dense_solve(Dense{{2, 1}, {1, 2}}, Dense{{3}, {3}});
  EXPECT_DOUBLE_EQ(x(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(x(1, 0), 1.0);
}

TEST(DenseSolve, IdentityReturnsRhs) {
  const Dense b{{1.5, -2}, {0.25, 7}, {3, 4}};
  EXPECT_EQ(dense_solve(Dense::identity(3), b), b);
}

TEST(DenseSolve, HilbertInverseFirstColumn) {
  Dense h(4, 4);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) h(i, j) = 1.0 / static_cast<double>(i + j + 1);
  }
  const Dense x = dense_solve(h, Dense{{1}, {0}, {0}, {0}});
  const double expected[4] = {16, -120, 240, -140};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(x(i, 0), expected[i], 1e-9);
}

TEST(DenseSolve, SingularMatrixThrows) {
  EXPECT_THROW(dense_solve(Dense{{1, 2}, {2, 4}}, Dense{{1}, {1}}), SingularPivot);
  EXPECT_THROW(dense_solve(Dense(3, 3), Dense(3, 1)), SingularPivot);
}

TEST(DenseSolve, ShapeMismatchThrows) {
  EXPECT_THROW(dense_solve(Dense(2, 3), Dense(2, 1)), DimensionMismatch);
  EXPECT_THROW(dense_solve(Dense::identity(2), Dense(3, 1)), DimensionMismatch);
}

TEST(DenseSolve, RandomSystemsMatchReference) {
  std::mt19937_64 rng(11);
  for (const std::size_t n : {1u, 2u, 5u, 17u, 40u}) {
    const Dense a = oracle::random_dense(n, n, rng) + 2.0 * Dense::identity(n);
    const Dense b = oracle::random_dense(n, 3, rng);
    const Dense x = dense_solve(a, b);
    EXPECT_LE(oracle::relative_residual(oracle::expand(a), x, b), 1e-12) << "n=" << n;
    EXPECT_LE(oracle::max_diff(x, oracle::reference_solve(oracle::expand(a), b)), 1e-11) << "n=" << n;
  }
}

TEST(DenseSolve, RightSolveInvertsFromTheRight) {
  std::mt19937_64 rng(5);
  const Dense d = oracle::random_dense(3, 3, rng) + 3.0 * Dense::identity(3);
  const Dense a = oracle::random_dense(2, 3, rng);
  EXPECT_LE(max_abs_diff(right_solve(a, d) * d, a), 1e-14);
}

TEST(Dense, BlocksAndConcatenation) {
  Dense a{{1, 2, 3}, {4, 5, 6}};
  EXPECT_EQ(a.block(0, 1, 2, 2), (Dense{{2, 3}, {5, 6}}));
  a.set_block(1, 0, Dense{{9, 8}});
  EXPECT_EQ(a, (Dense{{1, 2, 3}, {9, 8, 6}}));
  const Dense l{{1}, {2}};
  const Dense r{{3, 4}, {5, 6}};
  EXPECT_EQ(hcat({&l, &r}), (Dense{{1, 3, 4}, {2, 5, 6}}));
  EXPECT_EQ(a.transposed().transposed(), a);
  EXPECT_DOUBLE_EQ(a.max_abs(), 9.0);
}

TEST(Dense, ArithmeticMatchesHandResults) {
  const Dense a{{1, 2}, {3, 4}};
  const Dense b{{0, 1}, {1, 0}};
  EXPECT_EQ(a * b, (Dense{{2, 1}, {4, 3}}));
  EXPECT_EQ(a + b, (Dense{{1, 3}, {4, 4}}));
  EXPECT_EQ(a - b, (Dense{{1, 1}, {2, 4}}));
  EXPECT_EQ(2.0 * a, (Dense{{2, 4}, {6, 8}}));
  EXPECT_THROW(a * Dense(3, 1), DimensionMismatch);
}

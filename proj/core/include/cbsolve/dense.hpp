#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cbsolve {

/// Row-major dense matrix of doubles.
///
/// Used for small r x r coupling blocks, for the dense reference solver and
/// as the right-hand-side batch type: an n x m batch stores row i's m
/// right-hand-side values contiguously, so every row operation of a solve
/// vectorizes over the batch.
class Dense {
 public:
  Dense() = default;
  Dense(std::size_t rows, std::size_t cols, double fill = 0.0);
  Dense(std::initializer_list<std::initializer_list<double>> rows);

  static Dense identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  /// Copy of the nr x nc sub-block starting at (r0, c0).
  Dense block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const;
  void set_block(std::size_t r0, std::size_t c0, const Dense& src);

  Dense transposed() const;
  double max_abs() const noexcept;

  Dense& operator+=(const Dense& other);
  Dense& operator-=(const Dense& other);
  Dense& operator*=(double s) noexcept;

  friend bool operator==(const Dense&, const Dense&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Dense operator+(Dense a, const Dense& b);
Dense operator-(Dense a, const Dense& b);
Dense operator*(const Dense& a, const Dense& b);
Dense operator*(double s, Dense a);

/// Right-hand-side batch: n rows, m simultaneous right-hand sides.
using RhsBatch = Dense;

/// Horizontal concatenation [a | b | ...]; all parts must share a row count.
Dense hcat(std::initializer_list<const Dense*> parts);

/// Maximum absolute entry of a - b.
double max_abs_diff(const Dense& a, const Dense& b);

/// Relative guard for dense elimination: a pivot is rejected when its
/// magnitude is below this fraction of its row's largest original entry.
inline constexpr double kDensePivotEps = 1e-13;

/// Solves a x = b by Gaussian elimination with partial pivoting.
/// Throws SingularPivot when a pivot is below kDensePivotEps times the
/// original scale of its row.
Dense dense_solve(const Dense& a, const Dense& b);

/// Returns a * d^{-1}, computed through dense_solve on the transposed system.
Dense right_solve(const Dense& a, const Dense& d);

}  // namespace cbsolve

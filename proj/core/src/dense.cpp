#include "cbsolve/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cbsolve/errors.hpp"

namespace cbsolve {

Dense::Dense(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Dense::Dense(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionMismatch("ragged initializer for Dense");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Dense Dense::identity(std::size_t n) {
  Dense out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Dense Dense::block(std::size_t r0, std::size_t c0, std::size_t nr, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) throw DimensionMismatch("block out of range");
  Dense out(nr, nc);
  for (std::size_t i = 0; i < nr; ++i) {
    std::copy_n(data_.data() + (r0 + i) * cols_ + c0, nc, out.data_.data() + i * nc);
  }
  return out;
}

void Dense::set_block(std::size_t r0, std::size_t c0, const Dense& src) {
  if (r0 + src.rows_ > rows_ || c0 + src.cols_ > cols_) {
    throw DimensionMismatch("set_block out of range");
  }
  for (std::size_t i = 0; i < src.rows_; ++i) {
    std::copy_n(src.data_.data() + i * src.cols_, src.cols_, data_.data() + (r0 + i) * cols_ + c0);
  }
}

Dense Dense::transposed() const {
  Dense out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  return out;
}

double Dense::max_abs() const noexcept {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

Dense& Dense::operator+=(const Dense& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionMismatch("Dense +=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Dense& Dense::operator-=(const Dense& other) {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionMismatch("Dense -=");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Dense& Dense::operator*=(double s) noexcept {
  for (double& v : data_) v *= s;
  return *this;
}

Dense operator+(Dense a, const Dense& b) { return a += b; }
Dense operator-(Dense a, const Dense& b) { return a -= b; }
Dense operator*(double s, Dense a) { return a *= s; }

Dense operator*(const Dense& a, const Dense& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("Dense product: inner dimensions differ");
  Dense out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto src = b.row(k);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Dense hcat(std::initializer_list<const Dense*> parts) {
  std::size_t rows = 0, cols = 0;
  bool first = true;
  for (const Dense* p : parts) {
    if (first) {
      rows = p->rows();
      first = false;
    } else if (p->rows() != rows) {
      throw DimensionMismatch("hcat: row counts differ");
    }
    cols += p->cols();
  }
  Dense out(rows, cols);
  std::size_t c0 = 0;
  for (const Dense* p : parts) {
    out.set_block(0, c0, *p);
    c0 += p->cols();
  }
  return out;
}

double max_abs_diff(const Dense& a, const Dense& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("max_abs_diff");
  double m = 0.0;
  auto va = a.values();
  auto vb = b.values();
  for (std::size_t k = 0; k < va.size(); ++k) m = std::max(m, std::abs(va[k] - vb[k]));
  return m;
}

Dense dense_solve(const Dense& a, const Dense& b) {
  const std::size_t n = a.rows();
  if (n == 0 || a.cols() != n) throw DimensionMismatch("dense_solve: matrix must be square and non-empty");
  if (b.rows() != n) throw DimensionMismatch("dense_solve: rhs row count differs from matrix");

  Dense lu = a;
  Dense x = b;
  const std::size_t m = b.cols();

  std::vector<double> scale(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : lu.row(i)) s = std::max(s, std::abs(v));
    scale[i] = s;
  }

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > std::abs(lu(piv, k))) piv = i;
    }
    const double pivot = lu(piv, k);
    if (!(std::abs(pivot) >= kDensePivotEps * scale[piv]) || pivot == 0.0) {
      throw SingularPivot("dense_solve: pivot " + std::to_string(pivot) + " in column " +
                          std::to_string(k) + " below guard");
    }
    if (piv != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(piv).begin());
      std::swap_ranges(x.row(k).begin(), x.row(k).end(), x.row(piv).begin());
      std::swap(scale[k], scale[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = lu(i, k) / pivot;
      if (f == 0.0) continue;
      lu(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) lu(i, j) -= f * lu(k, j);
      for (std::size_t j = 0; j < m; ++j) x(i, j) -= f * x(k, j);
    }
  }

  for (std::size_t kk = n; kk-- > 0;) {
    for (std::size_t j = 0; j < m; ++j) {
      double s = x(kk, j);
      for (std::size_t c = kk + 1; c < n; ++c) s -= lu(kk, c) * x(c, j);
      x(kk, j) = s / lu(kk, kk);
    }
  }
  return x;
}

Dense right_solve(const Dense& a, const Dense& d) {
  return dense_solve(d.transposed(), a.transposed()).transposed();
}

}  // namespace cbsolve

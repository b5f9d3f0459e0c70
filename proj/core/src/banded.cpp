#include "cbsolve/banded.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "cbsolve/errors.hpp"

namespace cbsolve {

BandedMatrix::BandedMatrix(std::size_t n, std::size_t w, bool cyclic) : n_(n), r_((w - 1) / 2), cyclic_(cyclic) {
  if (w < 3 || w % 2 == 0) throw InvalidArgument("bandwidth must be odd and >= 3, got " + std::to_string(w));
  if (n == 0) throw InvalidArgument("banded matrix needs at least one row");
  // Wrapped columns must stay distinct, so a cyclic matrix needs n >= w. Acyclic
  // blocks (per-rank interiors) may be narrower than the band.
  if (cyclic && n < w) {
    throw InvalidArgument("cyclic banded matrix needs n >= w (n=" + std::to_string(n) + ", w=" + std::to_string(w) + ")");
  }
  bands_.assign(w, std::vector<double>(n, 0.0));
}

BandedMatrix BandedMatrix::from_bands(std::vector<std::vector<double>> bands, bool cyclic) {
  const std::size_t w = bands.size();
  if (w == 0) throw InvalidArgument("no bands given");
  const std::size_t n = bands.front().size();
  BandedMatrix out(n, w, cyclic);
  for (const auto& b : bands) {
    if (b.size() != n) throw DimensionMismatch("all bands must have length n");
    for (double v : b) {
      if (!std::isfinite(v)) throw InvalidArgument("non-finite band entry");
    }
  }
  out.bands_ = std::move(bands);
  if (!cyclic) {
    const int r = static_cast<int>(out.r_);
    for (int t = -r; t <= r; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!out.column(i, t) && out.band(t, i) != 0.0) {
          throw InvalidArgument("acyclic matrix has a nonzero entry outside the matrix at row " +
                                std::to_string(i) + ", offset " + std::to_string(t));
        }
      }
    }
  }
  return out;
}

BandedMatrix BandedMatrix::uniform(std::size_t n, std::span<const double> stencil, bool cyclic) {
  BandedMatrix out(n, stencil.size(), cyclic);
  const int r = static_cast<int>(out.r_);
  for (int t = -r; t <= r; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      if (out.column(i, t)) out.band(t, i) = stencil[static_cast<std::size_t>(t + r)];
    }
  }
  return out;
}

std::optional<std::size_t> BandedMatrix::column(std::size_t row, int offset) const {
  const long long c = static_cast<long long>(row) + offset;
  const long long n = static_cast<long long>(n_);
  if (cyclic_) return static_cast<std::size_t>(((c % n) + n) % n);
  if (c < 0 || c >= n) return std::nullopt;
  return static_cast<std::size_t>(c);
}

double BandedMatrix::max_abs() const noexcept {
  double m = 0.0;
  for (const auto& b : bands_)
    for (double v : b) m = std::max(m, std::abs(v));
  return m;
}

Dense BandedMatrix::to_dense() const {
  Dense out(n_, n_);
  const int r = static_cast<int>(r_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (int t = -r; t <= r; ++t) {
      if (auto c = column(i, t)) out(i, *c) += band(t, i);
    }
  }
  return out;
}

namespace {

// Row index of the neighbor `j` strides away, or nullopt when absent.
std::optional<std::size_t> neighbor(std::size_t size, bool cyclic, std::size_t i, long long j, std::size_t stride) {
  const long long c = static_cast<long long>(i) + j * static_cast<long long>(stride);
  const long long n = static_cast<long long>(size);
  if (cyclic) return static_cast<std::size_t>(((c % n) + n) % n);
  if (c < 0 || c >= n) return std::nullopt;
  return static_cast<std::size_t>(c);
}

std::optional<std::size_t> neighbor(const BandedMatrix& mat, std::size_t i, long long j, std::size_t stride) {
  return neighbor(mat.size(), mat.cyclic(), i, j, stride);
}

// Unknown ordering used by the coefficient system: k_{-r}..k_{-1}, k_{+1}..k_{+r}.
long long unknown_offset(std::size_t q, std::size_t r) {
  return q < r ? -static_cast<long long>(r - q) : static_cast<long long>(q - r + 1);
}

// Gaussian elimination with partial pivoting on a small system, in place.
void solve_small(std::vector<double>& a, std::vector<double>& b, std::size_t n, double floor, std::size_t row) {
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i * n + k]) > std::abs(a[piv * n + k])) piv = i;
    if (!(std::abs(a[piv * n + k]) > floor)) {
      throw SingularPivot("PCR reduction coefficients singular at row " + std::to_string(row));
    }
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
      std::swap(b[k], b[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i * n + k] / a[k * n + k];
      if (f == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
      b[i] -= f * b[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= a[k * n + j] * b[j];
    b[k] = s / a[k * n + k];
  }
}

// Fills out[0..2r) with k_{-r}..k_{-1}, k_{+1}..k_{+r} for row i.
void reduction_coeffs_into(const BandedMatrix& mat, std::size_t i, std::size_t stride, double floor,
                           std::span<double> out) {
  const std::size_t r = mat.half_width();
  const long long rr = static_cast<long long>(r);

  if (r == 1) {
    // The coefficient system is diagonal.
    out[0] = 0.0;
    out[1] = 0.0;
    if (auto lo = neighbor(mat, i, -1, stride)) {
      const double d = mat.band(0, *lo);
      if (!(std::abs(d) > floor)) throw SingularPivot("PCR pivot below guard at row " + std::to_string(*lo));
      out[0] = mat.band(-1, i) / d;
    }
    if (auto hi = neighbor(mat, i, 1, stride)) {
      const double d = mat.band(0, *hi);
      if (!(std::abs(d) > floor)) throw SingularPivot("PCR pivot below guard at row " + std::to_string(*hi));
      out[1] = mat.band(1, i) / d;
    }
    return;
  }

  const std::size_t m = 2 * r;
  std::vector<double> a(m * m, 0.0);
  std::vector<double> b(m, 0.0);
  std::vector<bool> pinned(m, false);
  std::vector<std::optional<std::size_t>> nbr(m);
  for (std::size_t q = 0; q < m; ++q) nbr[q] = neighbor(mat, i, unknown_offset(q, r), stride);

  for (std::size_t k = 0; k < m; ++k) {
    // Equation k cancels the entry at odd offset t; it pairs with unknown k.
    const long long t = -(2 * rr - 1) + 2 * static_cast<long long>(k);
    if (!neighbor(mat, i, t, stride)) {
      // The target column lies outside the matrix: nothing to cancel, so pin
      // the paired coefficient to zero.
      a[k * m + k] = 1.0;
      pinned[k] = true;
      continue;
    }
    if (std::llabs(t) <= rr) b[k] = mat.band(static_cast<int>(t), i);
    for (std::size_t q = 0; q < m; ++q) {
      if (!nbr[q]) continue;
      const long long rel = t - unknown_offset(q, r);
      if (std::llabs(rel) <= rr) a[k * m + q] = mat.band(static_cast<int>(rel), *nbr[q]);
    }
  }
  // Equilibrate each equation: the outer targets couple only off-diagonal
  // entries, which shrink stage by stage, so a global guard misreads them.
  for (std::size_t k = 0; k < m; ++k) {
    if (pinned[k]) continue;
    double scale = 0.0;
    for (std::size_t q = 0; q < m; ++q) scale = std::max(scale, std::abs(a[k * m + q]));
    if (scale == 0.0) {
      if (b[k] != 0.0) throw SingularPivot("PCR reduction coefficients singular at row " + std::to_string(i));
      // Nothing to cancel and no neighbor reaches the column.
      a[k * m + k] = 1.0;
      continue;
    }
    for (std::size_t q = 0; q < m; ++q) a[k * m + q] /= scale;
    b[k] /= scale;
  }
  solve_small(a, b, m, kPcrPivotEps, i);
  for (std::size_t q = 0; q < m; ++q) out[q] = nbr[q] ? b[q] : 0.0;
}

// Applies one reduction stage at `stride`, returning the system at 2*stride.
BandedMatrix reduce_stage(const BandedMatrix& cur, std::size_t stride, std::vector<double>& coeffs) {
  const std::size_t n = cur.size();
  const std::size_t r = cur.half_width();
  const int ri = static_cast<int>(r);
  const std::size_t m = 2 * r;
  const double floor = kPcrPivotEps * cur.max_abs();

  coeffs.assign(n * m, 0.0);
  BandedMatrix next(n, cur.width(), cur.cyclic());
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> k(coeffs.data() + i * m, m);
    reduction_coeffs_into(cur, i, stride, floor, k);
    for (int u = -ri; u <= ri; ++u) {
      double v = (std::abs(2 * u) <= ri) ? cur.band(2 * u, i) : 0.0;
      for (std::size_t q = 0; q < m; ++q) {
        if (k[q] == 0.0) continue;
        const long long j = unknown_offset(q, r);
        const long long rel = 2 * u - j;
        if (std::llabs(rel) > ri) continue;
        auto row = neighbor(cur, i, j, stride);
        if (row) v -= k[q] * cur.band(static_cast<int>(rel), *row);
      }
      if (!neighbor(cur, i, 2 * u, stride)) v = 0.0;
      next.band(u, i) = v;
    }
  }
  return next;
}

void apply_stage_rhs(std::size_t r, std::size_t stride, std::span<const double> coeffs, const Dense& in, Dense& out) {
  const std::size_t n = in.rows();
  const std::size_t m = 2 * r;
  const std::size_t cols = in.cols();
  out = in;
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.row(i);
    for (std::size_t q = 0; q < m; ++q) {
      const double k = coeffs[i * m + q];
      if (k == 0.0) continue;
      auto row = neighbor(n, false, i, unknown_offset(q, r), stride);
      if (!row) continue;
      auto src = in.row(*row);
      for (std::size_t c = 0; c < cols; ++c) dst[c] -= k * src[c];
    }
  }
}

void check_acyclic(const BandedMatrix& mat) {
  if (mat.cyclic()) throw InvalidArgument("shared-memory PCR requires an acyclic matrix");
}

}  // namespace

ReductionCoeffs compute_reduction_coeffs(const BandedMatrix& mat, std::size_t i, std::size_t stride) {
  if (i >= mat.size()) throw DimensionMismatch("row index out of range");
  if (stride == 0) throw InvalidArgument("stride must be positive");
  const std::size_t r = mat.half_width();
  std::vector<double> k(2 * r);
  reduction_coeffs_into(mat, i, stride, kPcrPivotEps * mat.max_abs(), k);
  ReductionCoeffs out;
  out.minus.resize(r);
  out.plus.resize(r);
  for (std::size_t j = 1; j <= r; ++j) {
    out.minus[j - 1] = k[r - j];
    out.plus[j - 1] = k[r + j - 1];
  }
  return out;
}

std::vector<PcrStage> pcr_trace(const BandedMatrix& mat, const Dense& rhs) {
  check_acyclic(mat);
  if (rhs.rows() != mat.size()) throw DimensionMismatch("pcr_trace: rhs rows differ from matrix");
  std::vector<PcrStage> out;
  out.push_back({1, mat, rhs});
  std::vector<double> coeffs;
  for (std::size_t s = 1; s < mat.size(); s *= 2) {
    const PcrStage& cur = out.back();
    BandedMatrix next = reduce_stage(cur.system, s, coeffs);
    Dense b;
    apply_stage_rhs(cur.system.half_width(), s, coeffs, cur.rhs, b);
    out.push_back({2 * s, std::move(next), std::move(b)});
  }
  return out;
}

PcrFactor::PcrFactor(const BandedMatrix& mat) : n_(mat.size()), r_(mat.half_width()) {
  check_acyclic(mat);
  BandedMatrix cur = mat;
  for (std::size_t s = 1; s < n_; s *= 2) {
    std::vector<double> coeffs;
    BandedMatrix next = reduce_stage(cur, s, coeffs);
    coeffs_.push_back(std::move(coeffs));
    cur = std::move(next);
  }
  const double floor = kPcrPivotEps * cur.max_abs();
  diag_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double d = cur.band(0, i);
    if (!(std::abs(d) > floor)) throw SingularPivot("PCR final pivot below guard at row " + std::to_string(i));
    diag_[i] = d;
  }
}

RhsBatch PcrFactor::solve(const RhsBatch& rhs) const {
  if (rhs.rows() != n_) throw DimensionMismatch("PCR solve: rhs has " + std::to_string(rhs.rows()) +
                                                " rows, matrix has " + std::to_string(n_));
  Dense cur = rhs;
  Dense next;
  std::size_t s = 1;
  for (const auto& coeffs : coeffs_) {
    apply_stage_rhs(r_, s, coeffs, cur, next);
    std::swap(cur, next);
    s *= 2;
  }
  for (std::size_t i = 0; i < n_; ++i) {
    const double inv = 1.0 / diag_[i];
    for (double& v : cur.row(i)) v *= inv;
  }
  return cur;
}

RhsBatch pcr_full_solve(const BandedMatrix& mat, const RhsBatch& rhs) { return PcrFactor(mat).solve(rhs); }

RhsBatch matvec(const BandedMatrix& mat, const RhsBatch& x) {
  if (x.rows() != mat.size()) throw DimensionMismatch("matvec: vector rows differ from matrix");
  const int r = static_cast<int>(mat.half_width());
  Dense y(x.rows(), x.cols());
  for (std::size_t i = 0; i < mat.size(); ++i) {
    auto dst = y.row(i);
    for (int t = -r; t <= r; ++t) {
      auto c = mat.column(i, t);
      if (!c) continue;
      const double a = mat.band(t, i);
      auto src = x.row(*c);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += a * src[j];
    }
  }
  return y;
}

std::vector<double> residual_inf(const BandedMatrix& mat, const RhsBatch& x, const RhsBatch& b) {
  if (b.rows() != mat.size() || b.cols() != x.cols()) throw DimensionMismatch("residual_inf: shapes differ");
  const Dense ax = matvec(mat, x);
  std::vector<double> out(b.cols(), 0.0);
  for (std::size_t j = 0; j < b.cols(); ++j) {
    double res = 0.0, bn = 0.0;
    for (std::size_t i = 0; i < b.rows(); ++i) {
      res = std::max(res, std::abs(ax(i, j) - b(i, j)));
      bn = std::max(bn, std::abs(b(i, j)));
    }
    out[j] = res / std::max(1.0, bn);
  }
  return out;
}

}  // namespace cbsolve

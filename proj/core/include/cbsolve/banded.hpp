#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cbsolve/dense.hpp"

namespace cbsolve {

/// Compact banded matrix stored diagonal-major.
///
/// Band `offset` in [-r, r] holds, for each row i, the coefficient that row i
/// applies to column i + offset. Cyclic matrices wrap that column modulo n;
/// acyclic matrices must hold exact zeros wherever i + offset leaves [0, n).
class BandedMatrix {
 public:
  BandedMatrix() = default;
  /// Zero matrix with n rows and odd bandwidth w >= 3, n >= w.
  BandedMatrix(std::size_t n, std::size_t w, bool cyclic);

  /// Builds from w diagonals ordered lower to upper, each of length n.
  static BandedMatrix from_bands(std::vector<std::vector<double>> bands, bool cyclic);
  /// Constant-coefficient matrix B[s_{-r}, ..., s_r]. Out-of-range entries of
  /// an acyclic matrix are left at zero.
  static BandedMatrix uniform(std::size_t n, std::span<const double> stencil, bool cyclic);

  std::size_t size() const noexcept { return n_; }
  std::size_t width() const noexcept { return 2 * r_ + 1; }
  std::size_t half_width() const noexcept { return r_; }
  bool cyclic() const noexcept { return cyclic_; }

  double band(int offset, std::size_t row) const { return bands_[index(offset)][row]; }
  double& band(int offset, std::size_t row) { return bands_[index(offset)][row]; }
  std::span<const double> diagonal(int offset) const { return bands_[index(offset)]; }

  /// Global column touched by (row, offset), or nullopt when it falls outside
  /// an acyclic matrix.
  std::optional<std::size_t> column(std::size_t row, int offset) const;

  double max_abs() const noexcept;
  Dense to_dense() const;

 private:
  std::size_t index(int offset) const { return static_cast<std::size_t>(offset + static_cast<int>(r_)); }

  std::size_t n_ = 0;
  std::size_t r_ = 0;
  bool cyclic_ = false;
  std::vector<std::vector<double>> bands_;
};

/// Elimination coefficients for one row of a PCR stage.
/// minus[j-1] multiplies the neighbor j strides above, plus[j-1] the neighbor
/// j strides below.
struct ReductionCoeffs {
  std::vector<double> minus;
  std::vector<double> plus;
};

/// Relative pivot guard for unpivoted PCR: pivots must exceed this fraction of
/// the largest band magnitude of the sub-system being reduced.
inline constexpr double kPcrPivotEps = 1e-13;

/// Coefficients that cancel the odd-stride entries of row i.
///
/// `mat` is the current stage system: band(t, k) couples row k to row
/// k + t * stride. The returned k_{+-j} make
///   row_i - sum_j (k_{+j} row_{i+j*stride} + k_{-j} row_{i-j*stride})
/// vanish at columns i + t*stride for every odd t. Neighbors outside an acyclic
/// matrix get zero coefficients.
ReductionCoeffs compute_reduction_coeffs(const BandedMatrix& mat, std::size_t i, std::size_t stride);

/// One stage of a shared-memory PCR run, kept for inspection.
struct PcrStage {
  std::size_t stride = 1;
  BandedMatrix system;  // bands relative to `stride`
  Dense rhs;
};

/// Runs PCR on an acyclic system and returns every intermediate system,
/// starting with the input itself at stride 1.
std::vector<PcrStage> pcr_trace(const BandedMatrix& mat, const Dense& rhs);

/// Pre-factorized generalized PCR for an acyclic banded matrix.
///
/// The constructor performs ceil(log2 n) reduction stages and keeps the
/// per-row coefficients, so repeated solves only touch right-hand sides.
class PcrFactor {
 public:
  PcrFactor() = default;
  explicit PcrFactor(const BandedMatrix& mat);

  RhsBatch solve(const RhsBatch& rhs) const;

  std::size_t size() const noexcept { return n_; }
  std::size_t stages() const noexcept { return coeffs_.size(); }

 private:
  std::size_t n_ = 0;
  std::size_t r_ = 0;
  // coeffs_[stage] is n x 2r: k_{-r}..k_{-1}, k_{+1}..k_{+r} per row.
  std::vector<std::vector<double>> coeffs_;
  std::vector<double> diag_;
};

/// Solves an acyclic banded system with generalized PCR.
RhsBatch pcr_full_solve(const BandedMatrix& mat, const RhsBatch& rhs);

RhsBatch matvec(const BandedMatrix& mat, const RhsBatch& x);

/// Per-column ||A x - b||_inf / max(1, ||b||_inf).
std::vector<double> residual_inf(const BandedMatrix& mat, const RhsBatch& x, const RhsBatch& b);

}  // namespace cbsolve

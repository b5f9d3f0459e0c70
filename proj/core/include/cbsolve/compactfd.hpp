#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "cbsolve/banded.hpp"
#include "cbsolve/dense.hpp"
#include "cbsolve/partition.hpp"
#include "cbsolve/solver.hpp"
#include "cbsolve/transport.hpp"

namespace cbsolve {

enum class SchemeKind { collocated_d1_6, staggered_d1_6, staggered_interp_6 };

/// Which grid a staggered scheme writes to. Staggered point i+1/2 is stored
/// at index i. Ignored by the collocated scheme.
enum class StaggerDirection { to_staggered, to_collocated };

/// Sixth-order compact scheme on a uniform periodic grid:
///   alpha f_{i-1} + f_i + alpha f_{i+1} = explicit stencil with weights (a, b).
struct SchemeSpec {
  SchemeKind kind = SchemeKind::collocated_d1_6;
  double alpha = 0.0;
  double a = 0.0;
  double b = 0.0;
  double h = 1.0;
  bool periodic = true;
  StaggerDirection direction = StaggerDirection::to_staggered;

  static SchemeSpec make(SchemeKind kind, double h, StaggerDirection direction = StaggerDirection::to_staggered);
};

/// Cyclic tridiagonal (alpha, 1, alpha). Requires n >= 5 and a periodic spec.
BandedMatrix build_lhs(const SchemeSpec& spec, std::size_t n);

/// 3-D scalar field, row-major with the third index contiguous.
class Field3 {
 public:
  using Dims = std::array<std::size_t, 3>;

  Field3() = default;
  explicit Field3(Dims dims, double fill = 0.0);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t dim(int axis) const { return dims_.at(static_cast<std::size_t>(axis)); }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return values_[(i * dims_[1] + j) * dims_[2] + k]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * dims_[1] + j) * dims_[2] + k];
  }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }

 private:
  Dims dims_{0, 0, 0};
  std::vector<double> values_;
};

/// Lines along `axis` as the rows of a dense batch: entry (a, c) is the value
/// at coordinate a along the axis; c enumerates the other two indices in
/// row-major order. The field occupies columns [col0, col0 + batch).
void gather_axis(const Field3& f, int axis, Dense& out, std::size_t col0);
void scatter_axis(const Dense& in, int axis, std::size_t col0, Field3& f);

/// Explicit right-hand side of the scheme along `axis` of a whole periodic
/// field (single rank).
Field3 apply_rhs(const SchemeSpec& spec, const Field3& field, int axis);

/// Compact operator (derivative or interpolation) along one axis of a field
/// decomposed over the ranks of `comm` along that axis.
///
/// The left-hand side is factorized once at construction; each apply()
/// exchanges two halo planes with each neighbor, evaluates the explicit
/// stencil and runs one partitioned solve for all fields at once.
class CompactOperator {
 public:
  CompactOperator(Communicator& comm, const SchemeSpec& spec, const PartitionLayout& layout);

  const SchemeSpec& spec() const noexcept { return spec_; }
  const PartitionLayout& layout() const noexcept { return layout_; }

  Field3 apply(Communicator& comm, const Field3& field, int axis) const;
  std::vector<Field3> apply(Communicator& comm, std::span<const Field3* const> fields, int axis) const;

 private:
  SchemeSpec spec_;
  PartitionLayout layout_;
  PartitionedSolver solver_;
};

/// One-off operator application; collective.
Field3 derivative(const Field3& field, int axis, const SchemeSpec& spec, const PartitionLayout& layout,
                  Communicator& comm);

}  // namespace cbsolve

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "cbsolve/banded.hpp"
#include "cbsolve/dense.hpp"

namespace cbsolve {

/// Split of a global banded system into p contiguous partitions.
///
/// Global unknowns are ordered [xt_0, x_0, xt_1, x_1, ...]: each rank owns r
/// interface rows xt_i followed by N_i interior rows x_i.
struct PartitionLayout {
  std::vector<std::size_t> sizes;  // N_i, interior rows per rank
  std::size_t r = 1;
  bool cyclic = true;

  /// Equal split of n global rows over p ranks; leftover rows go to the
  /// leading ranks.
  static PartitionLayout equal(std::size_t n, std::size_t p, std::size_t r, bool cyclic);

  std::size_t ranks() const noexcept { return sizes.size(); }
  std::size_t global_rows() const noexcept;
  /// First global row (the first interface row) owned by `rank`.
  std::size_t offset(std::size_t rank) const;
  /// Rows held by `rank`: r interface rows plus N_i interior rows.
  std::size_t local_rows(std::size_t rank) const { return sizes.at(rank) + r; }

  /// Throws InvalidArgument unless p >= 1, r >= 1 and every N_i >= r.
  /// N_i >= r keeps every coupling inside the neighboring partitions.
  void validate() const;
};

/// The pieces of the global matrix seen by one rank.
///
/// Coupling blocks are stored as their r x r nonzero corners:
///  - interior_lower: top-left corner of L_i (N_i x r), interior rows -> own interface
///  - interior_upper: bottom-right corner of U_i (N_i x r), interior rows -> next interface
///  - iface_lower: last r columns of Lt_i (r x N_{i-1}), interface -> previous interior
///  - iface_diag: Dt_i, interface rows among themselves
///  - iface_upper: first r columns of Ut_i (r x N_i), interface -> own interior
struct LocalBlocks {
  std::size_t rank = 0;
  std::size_t r = 1;
  std::size_t prev_size = 0;  // N_{i-1}, zero if there is no previous partition
  BandedMatrix interior;      // D_i, always acyclic
  Dense interior_lower;
  Dense interior_upper;
  Dense iface_lower;
  Dense iface_diag;
  Dense iface_upper;

  std::size_t interior_rows() const noexcept { return interior.size(); }

  // Expanded forms, mostly for tests.
  Dense full_interior_lower() const;  // N_i x r
  Dense full_interior_upper() const;  // N_i x r
  Dense full_iface_lower() const;     // r x N_{i-1}
  Dense full_iface_upper() const;     // r x N_i
};

/// One rank's share of a global system: its blocks plus local right-hand
/// sides, interface rows first ([bt_i; b_i]).
struct LocalSystem {
  LocalBlocks blocks;
  Dense rhs;
};

std::vector<LocalBlocks> split_matrix(const BandedMatrix& a, const PartitionLayout& layout);
std::vector<Dense> split_rhs(const Dense& b, const PartitionLayout& layout);
std::vector<LocalSystem> split_global(const BandedMatrix& a, const Dense& b, const PartitionLayout& layout);

/// Rebuilds the global matrix from per-rank blocks.
BandedMatrix reassemble(const std::vector<LocalBlocks>& blocks, const PartitionLayout& layout);
/// Stacks per-rank local row blocks into the global vector.
Dense gather_rows(const std::vector<Dense>& parts);

/// Last r rows of a rank's interior responses, the only data a rank needs
/// from its predecessor to form its reduced row.
struct BoundaryTail {
  Dense own_response;   // last r rows of S_{i-1}
  Dense next_response;  // last r rows of R_{i-1}
  Dense y;              // last r rows of y_{i-1}; empty when exchanged separately
};

/// Per-rank pre-factorized interior data.
///
/// own_response = D_i^{-1} L_i is how x_i reacts to its own interface xt_i;
/// next_response = D_i^{-1} U_i is how it reacts to the next interface xt_{i+1}.
struct LocalFactor {
  std::size_t r = 1;
  PcrFactor interior;
  Dense own_response;   // S_i, N_i x r
  Dense next_response;  // R_i, N_i x r
  Dense iface_lower;
  Dense iface_diag;
  Dense iface_upper;

  std::size_t interior_rows() const noexcept { return interior.size(); }
  /// Last r rows of S_i and R_i; y is left empty.
  BoundaryTail tail() const;
};

/// Row i of the reduced interface system
///   lower * xt_{i-1} + diag * xt_i + upper * xt_{i+1} = rhs.
struct ReducedRow {
  Dense lower;
  Dense diag;
  Dense upper;
  Dense rhs;
  std::size_t owner = 0;
};

LocalFactor factorize_local(const LocalBlocks& blocks);

/// y_i = D_i^{-1} b_i using the stored factorization.
RhsBatch forward_rhs(const LocalFactor& factor, const RhsBatch& b);

/// Reduced-row matrix blocks; rhs is left empty. `prev` is the predecessor's
/// tail, absent only when the rank has no predecessor (acyclic rank 0).
ReducedRow reduced_blocks(const LocalFactor& factor, const std::optional<BoundaryTail>& prev);

/// Reduced-row right-hand side bt_i - Lt_i y_{i-1} - Ut_i y_i.
Dense reduced_rhs(const LocalFactor& factor, const Dense& iface_rhs, const Dense& y,
                  const std::optional<Dense>& prev_y_tail);

/// Full reduced row; `prev` must carry y when present.
ReducedRow assemble_reduced(const LocalFactor& factor, const std::optional<BoundaryTail>& prev, const Dense& iface_rhs,
                            const Dense& y);

/// x_i = y_i - S_i xt_i - R_i xt_{i+1}.
RhsBatch back_substitute(const LocalFactor& factor, const RhsBatch& y, const Dense& own_iface, const Dense& next_iface);

}  // namespace cbsolve

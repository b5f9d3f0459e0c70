#pragma once

#include <cstddef>

#include "cbsolve/banded.hpp"
#include "cbsolve/dense.hpp"
#include "cbsolve/partition.hpp"
#include "cbsolve/reduced.hpp"
#include "cbsolve/transport.hpp"

namespace cbsolve {

/// One rank's share of a pre-factorized partitioned solver.
///
/// Construction is collective: it factorizes the interior, exchanges the
/// r x 2r boundary tails of S and R with the neighboring ranks and factorizes
/// the reduced system. solve() is collective as well and only moves
/// right-hand-side data.
class PartitionedSolver {
 public:
  PartitionedSolver(Communicator& comm, const LocalBlocks& blocks, bool cyclic);

  /// Solves for this rank's rows [xt_i; x_i] given its local right-hand
  /// sides [bt_i; b_i] ((r + N_i) x m).
  RhsBatch solve(Communicator& comm, const RhsBatch& local_rhs) const;

  const LocalFactor& factor() const noexcept { return factor_; }
  const ReducedSolver& reduced() const noexcept { return reduced_; }

 private:
  bool cyclic_;
  LocalFactor factor_;
  ReducedSolver reduced_;
};

/// One-shot collective solve without stored factors. The assembly exchange
/// is a single r x (2r + m) message from each rank to its successor.
RhsBatch solve_partitioned(Communicator& comm, const LocalSystem& local, bool cyclic);

/// Splits a global system over the ranks of `world`, solves it with the
/// one-shot path and gathers the solution.
RhsBatch solve_in_world(World& world, const BandedMatrix& a, const RhsBatch& b, const PartitionLayout& layout);

}  // namespace cbsolve

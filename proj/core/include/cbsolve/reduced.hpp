#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cbsolve/dense.hpp"
#include "cbsolve/partition.hpp"
#include "cbsolve/transport.hpp"

namespace cbsolve {

enum class StageKind { pcr, detach };

/// One communication stage of the reduced solve.
///
/// Sub-systems are ordered lists of reduced-row owners as they stand when the
/// stage starts. A PCR stage couples each row with its list neighbors and
/// splits every sub-system into its even and odd positions. A detach stage
/// removes the last row of every odd-sized sub-system.
struct ScheduleStage {
  StageKind kind = StageKind::pcr;
  std::size_t level = 0;
  std::vector<std::vector<RankId>> subsystems;
  std::vector<RankId> detached;  // detach stages only
};

struct DetachSchedule {
  std::size_t ranks = 1;
  bool cyclic = true;
  std::vector<ScheduleStage> stages;
  std::size_t pcr_stages = 0;
  std::size_t detach_stages = 0;
  std::size_t detached_rows = 0;

  /// Barriers entered by every rank during one solve: each detach stage is
  /// mirrored by a reattach stage.
  std::size_t solve_stages() const noexcept { return pcr_stages + 2 * detach_stages; }
};

DetachSchedule build_schedule(std::size_t p, bool cyclic);

/// Sub-systems left once `stage` has completed.
std::vector<std::vector<RankId>> subsystems_after(const ScheduleStage& stage);

/// A row's partners in a PCR stage. Inactive rows sit in a size-1 sub-system
/// (acyclic only) or are not part of any sub-system.
struct PcrPartners {
  bool active = false;
  std::optional<RankId> left;
  std::optional<RankId> right;
};

PcrPartners pcr_partners(const ScheduleStage& stage, RankId rank, bool cyclic);

struct DetachRole {
  enum class Kind { idle, detached, left_neighbor, right_neighbor };
  Kind kind = Kind::idle;
  RankId detached_row = 0;  // neighbors: the row being detached
  RankId left = 0;          // detached row: its list neighbors
  RankId right = 0;
};

DetachRole detach_role(const ScheduleStage& stage, RankId rank);

// Serial building blocks. They operate on full rows and double as the
// reference for the distributed solver.

/// Eliminates the couplings of `row` to its neighbors; either neighbor may be
/// absent. A row without rhs (empty) is treated as blocks-only.
ReducedRow block_pcr_step(const ReducedRow& row, const ReducedRow* left, const ReducedRow* right);

struct DetachRecord {
  ReducedRow row;  // the detached row as it stood when it was removed
  RankId left = 0;
  RankId right = 0;
};

struct DetachResult {
  std::vector<ReducedRow> rows;
  DetachRecord record;
};

/// Removes the last row of an odd-sized cyclic sub-system; the previous row
/// and the first row absorb its couplings.
DetachResult detach_step(std::vector<ReducedRow> rows);

/// Solution of a detached row from its two neighbors' solutions.
Dense reattach_step(const DetachRecord& record, const Dense& left_solution, const Dense& right_solution);

/// Solution of a row that has become decoupled. A cyclic size-1 sub-system
/// couples the row to itself on both sides.
Dense decoupled_solve(const ReducedRow& row, bool cyclic);

/// Called after each stage with the sub-systems that remain and all rows,
/// indexed by owner.
using StageObserver = std::function<void(const ScheduleStage& stage,
                                         const std::vector<std::vector<RankId>>& remaining,
                                         const std::vector<ReducedRow>& rows)>;

/// Single-process solve of the reduced system following `schedule`.
/// rows[i] is the row owned by rank i.
std::vector<Dense> solve_reduced_serial(std::vector<ReducedRow> rows, const DetachSchedule& schedule,
                                        const StageObserver& observer = {});

/// Assembled dense form of the reduced system, for oracles.
Dense assemble_reduced_dense(const std::vector<ReducedRow>& rows, bool cyclic);

// Distributed solve. Every function below is collective: all ranks of the
// communicator call it with the same schedule.

/// Pre-factorized reduced system. Construction runs the block stages once and
/// stores the multipliers; solve() then only moves r x m right-hand sides.
class ReducedSolver {
 public:
  ReducedSolver(Communicator& comm, const ReducedRow& row, DetachSchedule schedule);

  Dense solve(Communicator& comm, const Dense& rhs) const;

  const DetachSchedule& schedule() const noexcept { return schedule_; }
  std::size_t half_width() const noexcept { return r_; }

  struct Step {
    PcrPartners partners;
    DetachRole role;
    Dense multiplier_left;   // pcr, or the multiplier of a neighbor of a detached row
    Dense multiplier_right;  // pcr only
    ReducedRow record;       // blocks of this rank's row when it was detached
  };

 private:
  DetachSchedule schedule_;
  std::size_t r_ = 1;
  RankId rank_ = 0;
  std::vector<Step> steps_;
  bool detached_ = false;
  Dense final_matrix_;
};

/// One-shot solve: blocks and right-hand side travel together.
Dense solve_reduced(Communicator& comm, const ReducedRow& row, const DetachSchedule& schedule);

}  // namespace cbsolve

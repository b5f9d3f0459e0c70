#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cbsolve/errors.hpp"
#include "cbsolve/reduced.hpp"
#include "support/oracle.hpp"

using namespace cbsolve;

namespace {

const std::vector<std::size_t> kRanks{1, 2, 3, 4, 5, 7, 8, 11, 16};

std::vector<ReducedRow> random_rows(std::size_t p, std::size_t r, std::size_t m, bool cyclic, std::mt19937_64& rng) {
  std::vector<ReducedRow> rows(p);
  for (std::size_t q = 0; q < p; ++q) {
    auto& row = rows[q];
    row.lower = 0.5 * oracle::random_dense(r, r, rng);
    row.upper = 0.5 * oracle::random_dense(r, r, rng);
    if (!cyclic && q == 0) row.lower = Dense(r, r);
    if (!cyclic && q + 1 == p) row.upper = Dense(r, r);
    row.diag = oracle::random_dense(r, r, rng) + (2.0 * static_cast<double>(r) + 2.0) * Dense::identity(r);
    row.rhs = oracle::random_dense(r, m, rng);
    row.owner = q;
  }
  return rows;
}

// Dense reduced system built independently of the library: block row q has
// lower at column q-1, diag at q, upper at q+1 (wrapping when cyclic).
oracle::Matrix assemble(const std::vector<ReducedRow>& rows, bool cyclic) {
  const std::size_t p = rows.size();
  const std::size_t r = rows.front().diag.rows();
  oracle::Matrix m(p * r, std::vector<long double>(p * r, 0.0L));
  auto add = [&](std::size_t q, long long col, const Dense& blk) {
    if (col < 0 || col >= static_cast<long long>(p)) {
      if (!cyclic) return;
      col = (col + static_cast<long long>(p)) % static_cast<long long>(p);
    }
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < r; ++j) m[q * r + i][static_cast<std::size_t>(col) * r + j] += blk(i, j);
    }
  };
  for (std::size_t q = 0; q < p; ++q) {
    add(q, static_cast<long long>(q) - 1, rows[q].lower);
    add(q, static_cast<long long>(q), rows[q].diag);
    add(q, static_cast<long long>(q) + 1, rows[q].upper);
  }
  return m;
}

Dense stacked_rhs(const std::vector<ReducedRow>& rows) {
  Dense out(rows.size() * rows[0].rhs.rows(), rows[0].rhs.cols());
  for (std::size_t q = 0; q < rows.size(); ++q) out.set_block(q * rows[0].rhs.rows(), 0, rows[q].rhs);
  return out;
}

Dense stack(const std::vector<Dense>& parts) {
  Dense out(parts.size() * parts[0].rows(), parts[0].cols());
  for (std::size_t q = 0; q < parts.size(); ++q) out.set_block(q * parts[0].rows(), 0, parts[q]);
  return out;
}

}  // namespace

TEST(BuildSchedule, PowerOfTwoHasNoDetaching) {
  const DetachSchedule s = build_schedule(8, true);
  EXPECT_EQ(s.pcr_stages, 3u);
  EXPECT_EQ(s.detach_stages, 0u);
  EXPECT_EQ(s.detached_rows, 0u);
}

TEST(BuildSchedule, SingleRankIsEmpty) {
  for (const bool cyclic : {true, false}) {
    const DetachSchedule s = build_schedule(1, cyclic);
    EXPECT_TRUE(s.stages.empty());
    EXPECT_EQ(s.solve_stages(), 0u);
  }
}

TEST(BuildSchedule, ElevenRanksFollowTheWorkedExample) {
  const DetachSchedule s = build_schedule(11, true);
  EXPECT_EQ(s.pcr_stages, 3u);
  EXPECT_EQ(s.detached_rows, 3u);
  EXPECT_EQ(s.detach_stages, 2u);
  ASSERT_EQ(s.stages.size(), 5u);
  const StageKind expected[5] = {StageKind::detach, StageKind::pcr, StageKind::detach, StageKind::pcr, StageKind::pcr};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(s.stages[i].kind, expected[i]) << "stage " << i;
  EXPECT_EQ(s.stages[0].detached, (std::vector<RankId>{10}));
  EXPECT_EQ(s.stages[2].detached, (std::vector<RankId>{8, 9}));
  const auto halves = subsystems_after(s.stages[1]);
  EXPECT_EQ(halves, (std::vector<std::vector<RankId>>{{0, 2, 4, 6, 8}, {1, 3, 5, 7, 9}}));
}

TEST(BuildSchedule, ClosedFormsHoldUpToSixtyFour) {
  for (const bool cyclic : {true, false}) {
    for (std::size_t p = 1; p <= 64; ++p) {
      const DetachSchedule s = build_schedule(p, cyclic);
      const auto e = oracle::expected_counts(p, cyclic);
      EXPECT_EQ(s.pcr_stages, e.pcr_stages) << "p=" << p;
      EXPECT_EQ(s.detached_rows, e.detached_rows) << "p=" << p;
      EXPECT_EQ(s.detach_stages, e.detach_stages) << "p=" << p;
      std::set<RankId> detached;
      for (const auto& st : s.stages) {
        for (const RankId d : st.detached) EXPECT_TRUE(detached.insert(d).second) << "row detached twice";
      }
      EXPECT_EQ(detached.size(), s.detached_rows);
    }
  }
  EXPECT_THROW(build_schedule(0, true), InvalidArgument);
}

TEST(BuildSchedule, PcrPartnersAreListNeighbors) {
  const DetachSchedule s = build_schedule(4, true);
  const auto pr = pcr_partners(s.stages[0], 0, true);
  EXPECT_TRUE(pr.active);
  EXPECT_EQ(pr.left, RankId{3});
  EXPECT_EQ(pr.right, RankId{1});
  const DetachSchedule a = build_schedule(4, false);
  const auto first = pcr_partners(a.stages[0], 0, false);
  EXPECT_FALSE(first.left.has_value());
  EXPECT_EQ(first.right, RankId{1});
}

TEST(BlockPcrStep, ScalarUniformSystem) {
  ReducedRow row{Dense{{1.0 / 3.0}}, Dense{{1.0}}, Dense{{1.0 / 3.0}}, Dense{{1.0}}, 1};
  ReducedRow left = row, right = row;
  left.owner = 0;
  right.owner = 2;
  const ReducedRow out = block_pcr_step(row, &left, &right);
  EXPECT_NEAR(out.diag(0, 0), 7.0 / 9.0, 1e-15);
  EXPECT_NEAR(out.lower(0, 0), -1.0 / 9.0, 1e-15);
  EXPECT_NEAR(out.upper(0, 0), -1.0 / 9.0, 1e-15);
  EXPECT_NEAR(out.rhs(0, 0), 1.0 / 3.0, 1e-15);
}

TEST(BlockPcrStep, UncoupledRowIsUnchanged) {
  std::mt19937_64 rng(1);
  auto rows = random_rows(3, 2, 2, true, rng);
  rows[1].lower = Dense(2, 2);
  rows[1].upper = Dense(2, 2);
  const ReducedRow out = block_pcr_step(rows[1], &rows[0], &rows[2]);
  EXPECT_EQ(out.diag, rows[1].diag);
  EXPECT_EQ(out.rhs, rows[1].rhs);
  EXPECT_EQ(out.lower.max_abs(), 0.0);
  EXPECT_EQ(out.upper.max_abs(), 0.0);
}

TEST(DetachStep, ThreeRowsThenReattachMatchReference) {
  for (const std::size_t r : {1u, 2u}) {
    std::vector<ReducedRow> rows(3);
    for (std::size_t q = 0; q < 3; ++q) {
      rows[q] = ReducedRow{0.25 * Dense::identity(r), Dense::identity(r), 0.25 * Dense::identity(r),
                           Dense(r, 1, static_cast<double>(q + 1)), q};
    }
    const Dense ref = oracle::reference_solve(assemble(rows, true), stacked_rhs(rows));
    DetachResult d = detach_step(rows);
    ASSERT_EQ(d.rows.size(), 2u);
    EXPECT_EQ(d.record.row.owner, 2u);
    // Remaining pair: cyclic size 2, so lower and upper hit the same partner.
    oracle::Matrix pair(2 * r, std::vector<long double>(2 * r, 0.0L));
    Dense rhs(2 * r, 1);
    for (std::size_t q = 0; q < 2; ++q) {
      const std::size_t other = 1 - q;
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < r; ++j) {
          pair[q * r + i][q * r + j] += d.rows[q].diag(i, j);
          pair[q * r + i][other * r + j] += d.rows[q].lower(i, j) + d.rows[q].upper(i, j);
        }
      }
      rhs.set_block(q * r, 0, d.rows[q].rhs);
    }
    const Dense x01 = oracle::reference_solve(pair, rhs);
    const Dense x2 = reattach_step(d.record, x01.block(r, 0, r, 1), x01.block(0, 0, r, 1));
    EXPECT_LE(oracle::max_diff(x01, ref.block(0, 0, 2 * r, 1)), 1e-14);
    EXPECT_LE(oracle::max_diff(x2, ref.block(2 * r, 0, r, 1)), 1e-14);
  }
}

TEST(DetachStep, DecoupledRowSolvesItsOwnBlock) {
  std::mt19937_64 rng(2);
  auto rows = random_rows(5, 2, 3, true, rng);
  rows[4].lower = Dense(2, 2);
  rows[4].upper = Dense(2, 2);
  rows[3].upper = Dense(2, 2);
  rows[0].lower = Dense(2, 2);
  const DetachResult d = detach_step(rows);
  for (std::size_t q = 0; q < 4; ++q) {
    EXPECT_EQ(d.rows[q].diag, rows[q].diag);
    EXPECT_EQ(d.rows[q].rhs, rows[q].rhs);
  }
  const Dense x = reattach_step(d.record, Dense(2, 3, 9.0), Dense(2, 3, -9.0));
  EXPECT_LE(oracle::max_diff(rows[4].diag * x, rows[4].rhs), 1e-14);
}

TEST(DetachStep, RejectsEvenOrTrivialSubsystems) {
  std::mt19937_64 rng(3);
  EXPECT_THROW(detach_step(random_rows(4, 1, 1, true, rng)), InvalidArgument);
  EXPECT_THROW(detach_step(random_rows(1, 1, 1, true, rng)), InvalidArgument);
}

TEST(SerialReducedSolve, MatchesReferenceForAllRankCounts) {
  std::mt19937_64 rng(4);
  for (const bool cyclic : {true, false}) {
    for (const std::size_t r : {1u, 2u}) {
      for (const std::size_t p : kRanks) {
        const auto rows = random_rows(p, r, 3, cyclic, rng);
        const Dense ref = oracle::reference_solve(assemble(rows, cyclic), stacked_rhs(rows));
        const Dense x = stack(solve_reduced_serial(rows, build_schedule(p, cyclic)));
        EXPECT_LE(oracle::max_diff(x, ref), 1e-12) << "p=" << p << " r=" << r << " cyclic=" << cyclic;
      }
    }
  }
}

// After every stage, each remaining sub-system must still be satisfied by the
// reference solution.
TEST(SerialReducedSolve, EveryStagePreservesTheSolution) {
  std::mt19937_64 rng(5);
  for (const bool cyclic : {true, false}) {
    for (const std::size_t p : {3u, 7u, 11u, 13u}) {
      const std::size_t r = 2;
      const auto rows = random_rows(p, r, 2, cyclic, rng);
      const Dense ref = oracle::reference_solve(assemble(rows, cyclic), stacked_rhs(rows));
      auto x_of = [&](RankId q) { return ref.block(q * r, 0, r, 2); };
      std::size_t observed = 0;
      solve_reduced_serial(rows, build_schedule(p, cyclic),
                           [&](const ScheduleStage&, const std::vector<std::vector<RankId>>& remaining,
                               const std::vector<ReducedRow>& now) {
                             ++observed;
                             for (const auto& sub : remaining) {
                               const std::size_t k = sub.size();
                               for (std::size_t j = 0; j < k; ++j) {
                                 const ReducedRow& row = now[sub[j]];
                                 Dense lhs = row.diag * x_of(sub[j]);
                                 if (cyclic || j > 0) lhs += row.lower * x_of(sub[(j + k - 1) % k]);
                                 if (cyclic || j + 1 < k) lhs += row.upper * x_of(sub[(j + 1) % k]);
                                 EXPECT_LE(oracle::max_diff(lhs, row.rhs), 1e-12)
                                     << "p=" << p << " cyclic=" << cyclic << " row=" << sub[j];
                               }
                             }
                           });
      EXPECT_EQ(observed, build_schedule(p, cyclic).stages.size());
    }
  }
}

TEST(DistributedReducedSolve, MatchesReferenceAndStageCounts) {
  std::mt19937_64 rng(6);
  for (const bool cyclic : {true, false}) {
    for (const std::size_t r : {1u, 2u}) {
      for (const std::size_t p : kRanks) {
        const auto rows = random_rows(p, r, 3, cyclic, rng);
        const Dense ref = oracle::reference_solve(assemble(rows, cyclic), stacked_rhs(rows));
        const DetachSchedule schedule = build_schedule(p, cyclic);
        std::vector<Dense> one_shot(p), prefactored(p);
        World world(p);
        world.run([&](Communicator& comm) { one_shot[comm.rank()] = solve_reduced(comm, rows[comm.rank()], schedule); });
        for (RankId q = 0; q < p; ++q) EXPECT_EQ(world.counters(q).stages_entered, schedule.solve_stages());
        world.run([&](Communicator& comm) {
          ReducedRow blocks = rows[comm.rank()];
          blocks.rhs = Dense{};
          const ReducedSolver solver(comm, blocks, schedule);
          comm.reset_counters();
          prefactored[comm.rank()] = solver.solve(comm, rows[comm.rank()].rhs);
          EXPECT_EQ(comm.counters().stages_entered, schedule.solve_stages());
        });
        EXPECT_LE(oracle::max_diff(stack(one_shot), ref), 1e-12) << "p=" << p << " r=" << r << " cyclic=" << cyclic;
        EXPECT_LE(oracle::max_diff(stack(prefactored), ref), 1e-12) << "p=" << p << " r=" << r;
        if (p == 1) {
          EXPECT_EQ(world.total_counters().messages_sent, 0u);
        }
      }
    }
  }
}

// Every PCR participant exchanges with the partners the schedule names, and
// a detached row talks to exactly its two neighbors.
TEST(DistributedReducedSolve, ElevenRankTraceFollowsSchedule) {
  std::mt19937_64 rng(7);
  const std::size_t p = 11;
  const auto rows = random_rows(p, 1, 1, true, rng);
  const DetachSchedule schedule = build_schedule(p, true);
  World world(p);
  world.run([&](Communicator& comm) { solve_reduced(comm, rows[comm.rank()], schedule); });
  // Stage labels carry the position in the schedule, not a per-kind counter.
  std::vector<std::pair<const ScheduleStage*, std::string>> labelled;
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    const auto& st = schedule.stages[i];
    const std::string label = (st.kind == StageKind::pcr ? "reduced:pcr:" : "reduced:detach:") + std::to_string(i);
    labelled.emplace_back(&st, label);
  }
  for (RankId q = 0; q < p; ++q) {
    for (const auto& [st, label] : labelled) {
      std::multiset<RankId> peers;
      for (const auto& ev : world.trace(q)) {
        if (ev.kind == TraceEvent::Kind::send && ev.stage == label) peers.insert(ev.peer);
      }
      if (st->kind == StageKind::pcr) {
        const PcrPartners pr = pcr_partners(*st, q, true);
        std::multiset<RankId> expect;
        if (pr.left) expect.insert(*pr.left);
        if (pr.right) expect.insert(*pr.right);
        EXPECT_EQ(peers, expect) << "rank " << q << " " << label;
        if (pr.active) {
          EXPECT_EQ(peers.size(), 2u) << "rank " << q << " " << label;
        }
      } else {
        const DetachRole role = detach_role(*st, q);
        if (role.kind == DetachRole::Kind::detached) {
          EXPECT_EQ(peers, (std::multiset<RankId>{role.left, role.right})) << "rank " << q << " " << label;
        } else {
          EXPECT_TRUE(peers.empty()) << "rank " << q << " " << label;
        }
      }
    }
  }
}

TEST(DistributedReducedSolve, SingularDiagonalIsReported) {
  std::vector<ReducedRow> rows(2);
  // Both couplings of a cyclic pair hit the same neighbor: [[2, 2], [2, 2]].
  for (RankId q = 0; q < 2; ++q) rows[q] = ReducedRow{Dense{{1.0}}, Dense{{2.0}}, Dense{{1.0}}, Dense{{1.0}}, q};
  World world(2);
  EXPECT_THROW(world.run([&](Communicator& comm) { solve_reduced(comm, rows[comm.rank()], build_schedule(2, true)); }),
               SingularPivot);
}

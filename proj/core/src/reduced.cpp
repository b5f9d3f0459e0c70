#include "cbsolve/reduced.hpp"

#include <algorithm>
#include <numeric>

#include "cbsolve/errors.hpp"

namespace cbsolve {

namespace {

constexpr int kTagToLeft = 101;
constexpr int kTagToRight = 102;

enum class Payload { blocks, rhs, both };

std::string stage_label(const char* what, std::size_t index) {
  return std::string("reduced:") + what + ":" + std::to_string(index);
}

Dense pack(const ReducedRow& row, Payload what) {
  switch (what) {
    case Payload::blocks:
      return hcat({&row.lower, &row.diag, &row.upper});
    case Payload::rhs:
      return row.rhs;
    case Payload::both:
      break;
  }
  return hcat({&row.lower, &row.diag, &row.upper, &row.rhs});
}

ReducedRow unpack(const Dense& msg, std::size_t r, Payload what, RankId owner) {
  ReducedRow row;
  row.owner = owner;
  if (msg.rows() != r) throw ProtocolError("reduced row message has the wrong number of rows");
  if (what == Payload::rhs) {
    row.rhs = msg;
    return row;
  }
  if (msg.cols() < 3 * r || (what == Payload::blocks && msg.cols() != 3 * r)) {
    throw ProtocolError("reduced row message has the wrong number of columns");
  }
  row.lower = msg.block(0, 0, r, r);
  row.diag = msg.block(0, r, r, r);
  row.upper = msg.block(0, 2 * r, r, r);
  if (what == Payload::both) row.rhs = msg.block(0, 3 * r, r, msg.cols() - 3 * r);
  return row;
}

void check_row(const ReducedRow& row, std::size_t r) {
  if (row.diag.rows() != r || row.diag.cols() != r || row.lower.rows() != r || row.lower.cols() != r ||
      row.upper.rows() != r || row.upper.cols() != r) {
    throw DimensionMismatch("reduced row blocks must all be r x r");
  }
  if (!row.rhs.empty() && row.rhs.rows() != r) throw DimensionMismatch("reduced row rhs must have r rows");
}

// `row` absorbs a row `z` sitting to its right, through row.upper.
Dense absorb_right(ReducedRow& row, const ReducedRow& z) {
  Dense m = right_solve(row.upper, z.diag);
  row.diag -= m * z.lower;
  row.upper = -1.0 * (m * z.upper);
  if (!row.rhs.empty()) row.rhs -= m * z.rhs;
  return m;
}

// `row` absorbs a row `z` sitting to its left, through row.lower.
Dense absorb_left(ReducedRow& row, const ReducedRow& z) {
  Dense m = right_solve(row.lower, z.diag);
  row.diag -= m * z.upper;
  row.lower = -1.0 * (m * z.lower);
  if (!row.rhs.empty()) row.rhs -= m * z.rhs;
  return m;
}

ReducedRow pcr_combine(const ReducedRow& row, const ReducedRow* left, const ReducedRow* right, Dense* m_left,
                       Dense* m_right) {
  const std::size_t r = row.diag.rows();
  ReducedRow out;
  out.owner = row.owner;
  out.diag = row.diag;
  out.lower = Dense(r, r);
  out.upper = Dense(r, r);
  out.rhs = row.rhs;
  if (left) {
    Dense m = right_solve(row.lower, left->diag);
    out.diag -= m * left->upper;
    out.lower = -1.0 * (m * left->lower);
    if (!out.rhs.empty()) out.rhs -= m * left->rhs;
    if (m_left) *m_left = std::move(m);
  }
  if (right) {
    Dense m = right_solve(row.upper, right->diag);
    out.diag -= m * right->lower;
    out.upper = -1.0 * (m * right->upper);
    if (!out.rhs.empty()) out.rhs -= m * right->rhs;
    if (m_right) *m_right = std::move(m);
  }
  return out;
}

Dense final_matrix(const ReducedRow& row, bool cyclic) { return cyclic ? row.lower + row.diag + row.upper : row.diag; }

}  // namespace

std::vector<std::vector<RankId>> subsystems_after(const ScheduleStage& stage) {
  std::vector<std::vector<RankId>> out;
  for (const auto& sub : stage.subsystems) {
    if (stage.kind == StageKind::detach) {
      auto kept = sub;
      if (!kept.empty() && std::find(stage.detached.begin(), stage.detached.end(), kept.back()) != stage.detached.end()) {
        kept.pop_back();
      }
      out.push_back(std::move(kept));
      continue;
    }
    if (sub.size() < 2) {
      out.push_back(sub);
      continue;
    }
    std::vector<RankId> even;
    std::vector<RankId> odd;
    for (std::size_t k = 0; k < sub.size(); ++k) (k % 2 == 0 ? even : odd).push_back(sub[k]);
    out.push_back(std::move(even));
    out.push_back(std::move(odd));
  }
  return out;
}

DetachSchedule build_schedule(std::size_t p, bool cyclic) {
  if (p == 0) throw InvalidArgument("schedule needs at least one rank");
  DetachSchedule s;
  s.ranks = p;
  s.cyclic = cyclic;
  std::vector<std::vector<RankId>> current(1, std::vector<RankId>(p));
  std::iota(current[0].begin(), current[0].end(), RankId{0});
  auto unfinished = [&] {
    return std::any_of(current.begin(), current.end(), [](const auto& sub) { return sub.size() > 1; });
  };
  for (std::size_t level = 0; unfinished(); ++level) {
    if (cyclic) {
      ScheduleStage det{StageKind::detach, level, current, {}};
      for (const auto& sub : current) {
        if (sub.size() > 1 && sub.size() % 2 == 1) det.detached.push_back(sub.back());
      }
      if (!det.detached.empty()) {
        current = subsystems_after(det);
        s.detached_rows += det.detached.size();
        ++s.detach_stages;
        s.stages.push_back(std::move(det));
      }
    }
    ScheduleStage pcr{StageKind::pcr, level, current, {}};
    current = subsystems_after(pcr);
    ++s.pcr_stages;
    s.stages.push_back(std::move(pcr));
  }
  return s;
}

PcrPartners pcr_partners(const ScheduleStage& stage, RankId rank, bool cyclic) {
  PcrPartners out;
  if (stage.kind != StageKind::pcr) return out;
  for (const auto& sub : stage.subsystems) {
    const auto it = std::find(sub.begin(), sub.end(), rank);
    if (it == sub.end()) continue;
    const std::size_t d = sub.size();
    if (d < 2) return out;
    const std::size_t k = static_cast<std::size_t>(it - sub.begin());
    out.active = true;
    if (k > 0) {
      out.left = sub[k - 1];
    } else if (cyclic) {
      out.left = sub[d - 1];
    }
    if (k + 1 < d) {
      out.right = sub[k + 1];
    } else if (cyclic) {
      out.right = sub[0];
    }
    return out;
  }
  return out;
}

DetachRole detach_role(const ScheduleStage& stage, RankId rank) {
  DetachRole role;
  if (stage.kind != StageKind::detach) return role;
  for (const auto& sub : stage.subsystems) {
    const std::size_t d = sub.size();
    if (d < 3 || std::find(stage.detached.begin(), stage.detached.end(), sub.back()) == stage.detached.end()) {
      continue;
    }
    const RankId z = sub.back();
    if (rank == z) {
      role.kind = DetachRole::Kind::detached;
      role.detached_row = z;
      role.left = sub[d - 2];
      role.right = sub[0];
    } else if (rank == sub[d - 2]) {
      role.kind = DetachRole::Kind::left_neighbor;
      role.detached_row = z;
    } else if (rank == sub[0]) {
      role.kind = DetachRole::Kind::right_neighbor;
      role.detached_row = z;
    }
    if (role.kind != DetachRole::Kind::idle) return role;
  }
  return role;
}

ReducedRow block_pcr_step(const ReducedRow& row, const ReducedRow* left, const ReducedRow* right) {
  return pcr_combine(row, left, right, nullptr, nullptr);
}

DetachResult detach_step(std::vector<ReducedRow> rows) {
  const std::size_t d = rows.size();
  if (d < 3 || d % 2 == 0) throw InvalidArgument("detaching needs an odd sub-system of at least three rows");
  DetachResult out;
  out.record.row = rows.back();
  out.record.left = rows[d - 2].owner;
  out.record.right = rows[0].owner;
  const ReducedRow& z = out.record.row;
  absorb_right(rows[d - 2], z);
  absorb_left(rows[0], z);
  rows.pop_back();
  out.rows = std::move(rows);
  return out;
}

Dense reattach_step(const DetachRecord& record, const Dense& left_solution, const Dense& right_solution) {
  const ReducedRow& z = record.row;
  Dense rhs = z.rhs;
  rhs -= z.lower * left_solution;
  rhs -= z.upper * right_solution;
  return dense_solve(z.diag, rhs);
}

Dense decoupled_solve(const ReducedRow& row, bool cyclic) { return dense_solve(final_matrix(row, cyclic), row.rhs); }

std::vector<Dense> solve_reduced_serial(std::vector<ReducedRow> rows, const DetachSchedule& schedule,
                                        const StageObserver& observer) {
  const std::size_t p = schedule.ranks;
  if (rows.size() != p) throw DimensionMismatch("one reduced row per rank expected");
  const std::size_t r = rows[0].diag.rows();
  for (std::size_t i = 0; i < p; ++i) {
    check_row(rows[i], r);
    rows[i].owner = i;
  }
  const bool cyclic = schedule.cyclic;

  std::vector<DetachRecord> records;
  std::vector<std::vector<RankId>> remaining(1, std::vector<RankId>(p));
  std::iota(remaining[0].begin(), remaining[0].end(), RankId{0});
  for (const auto& stage : schedule.stages) {
    if (stage.kind == StageKind::pcr) {
      std::vector<ReducedRow> next = rows;
      for (RankId i = 0; i < p; ++i) {
        const PcrPartners nb = pcr_partners(stage, i, cyclic);
        if (!nb.active) continue;
        next[i] = block_pcr_step(rows[i], nb.left ? &rows[*nb.left] : nullptr, nb.right ? &rows[*nb.right] : nullptr);
      }
      rows = std::move(next);
    } else {
      for (const auto& sub : stage.subsystems) {
        if (sub.size() < 3 || sub.size() % 2 == 0) continue;
        std::vector<ReducedRow> list;
        for (RankId i : sub) list.push_back(rows[i]);
        DetachResult res = detach_step(std::move(list));
        for (auto& row : res.rows) rows[row.owner] = std::move(row);
        records.push_back(std::move(res.record));
      }
    }
    remaining = subsystems_after(stage);
    if (observer) observer(stage, remaining, rows);
  }

  std::vector<Dense> x(p);
  for (const auto& sub : remaining) {
    if (sub.size() != 1) throw InvalidArgument("schedule leaves a coupled sub-system");
    x[sub[0]] = decoupled_solve(rows[sub[0]], cyclic);
  }
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    x[it->row.owner] = reattach_step(*it, x[it->left], x[it->right]);
  }
  return x;
}

Dense assemble_reduced_dense(const std::vector<ReducedRow>& rows, bool cyclic) {
  const std::size_t p = rows.size();
  if (p == 0) return {};
  const std::size_t r = rows[0].diag.rows();
  Dense out(p * r, p * r);
  auto add = [&](std::size_t bi, std::size_t bj, const Dense& blk) {
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t c = 0; c < r; ++c) out(bi * r + a, bj * r + c) += blk(a, c);
    }
  };
  for (std::size_t i = 0; i < p; ++i) {
    check_row(rows[i], r);
    add(i, i, rows[i].diag);
    if (i > 0 || cyclic) add(i, (i + p - 1) % p, rows[i].lower);
    if (i + 1 < p || cyclic) add(i, (i + 1) % p, rows[i].upper);
  }
  return out;
}

namespace {

using Step = ReducedSolver::Step;

struct Working {
  ReducedRow row;
  bool detached = false;
};

// Runs the PCR and detach stages on blocks (and rhs when present), recording
// the multipliers each later rhs-only solve needs.
void forward_blocks(Communicator& comm, const DetachSchedule& sched, Working& w, std::vector<Step>& steps) {
  const Payload what = w.row.rhs.empty() ? Payload::blocks : Payload::both;
  const RankId me = comm.rank();
  const std::size_t r = w.row.diag.rows();
  steps.assign(sched.stages.size(), Step{});
  for (std::size_t i = 0; i < sched.stages.size(); ++i) {
    const ScheduleStage& stage = sched.stages[i];
    Step& st = steps[i];
    if (stage.kind == StageKind::pcr) {
      comm.stage_barrier(stage_label("pcr", i));
      st.partners = pcr_partners(stage, me, sched.cyclic);
      if (!st.partners.active) continue;
      const Dense msg = pack(w.row, what);
      if (st.partners.left) comm.send(*st.partners.left, kTagToLeft, msg);
      if (st.partners.right) comm.send(*st.partners.right, kTagToRight, msg);
      std::optional<ReducedRow> left;
      std::optional<ReducedRow> right;
      if (st.partners.left) left = unpack(comm.recv(*st.partners.left, kTagToRight), r, what, *st.partners.left);
      if (st.partners.right) right = unpack(comm.recv(*st.partners.right, kTagToLeft), r, what, *st.partners.right);
      w.row = pcr_combine(w.row, left ? &*left : nullptr, right ? &*right : nullptr, &st.multiplier_left,
                          &st.multiplier_right);
      continue;
    }
    comm.stage_barrier(stage_label("detach", i));
    st.role = detach_role(stage, me);
    switch (st.role.kind) {
      case DetachRole::Kind::detached: {
        const Dense msg = pack(w.row, what);
        comm.send(st.role.left, kTagToLeft, msg);
        comm.send(st.role.right, kTagToRight, msg);
        st.record = w.row;
        w.detached = true;
        break;
      }
      case DetachRole::Kind::left_neighbor:
        st.multiplier_left =
            absorb_right(w.row, unpack(comm.recv(st.role.detached_row, kTagToLeft), r, what, st.role.detached_row));
        break;
      case DetachRole::Kind::right_neighbor:
        st.multiplier_left =
            absorb_left(w.row, unpack(comm.recv(st.role.detached_row, kTagToRight), r, what, st.role.detached_row));
        break;
      case DetachRole::Kind::idle:
        break;
    }
  }
}

// Replays the recorded stages on a right-hand side only.
void forward_rhs(Communicator& comm, const DetachSchedule& sched, const std::vector<Step>& steps, Dense& b,
                 Dense& detached_rhs) {
  const std::size_t r = b.rows();
  for (std::size_t i = 0; i < sched.stages.size(); ++i) {
    const Step& st = steps[i];
    if (sched.stages[i].kind == StageKind::pcr) {
      comm.stage_barrier(stage_label("pcr", i));
      if (!st.partners.active) continue;
      if (st.partners.left) comm.send(*st.partners.left, kTagToLeft, b);
      if (st.partners.right) comm.send(*st.partners.right, kTagToRight, b);
      if (st.partners.left) {
        const Dense bl = unpack(comm.recv(*st.partners.left, kTagToRight), r, Payload::rhs, 0).rhs;
        b -= st.multiplier_left * bl;
      }
      if (st.partners.right) {
        const Dense br = unpack(comm.recv(*st.partners.right, kTagToLeft), r, Payload::rhs, 0).rhs;
        b -= st.multiplier_right * br;
      }
      continue;
    }
    comm.stage_barrier(stage_label("detach", i));
    switch (st.role.kind) {
      case DetachRole::Kind::detached:
        comm.send(st.role.left, kTagToLeft, b);
        comm.send(st.role.right, kTagToRight, b);
        detached_rhs = b;
        break;
      case DetachRole::Kind::left_neighbor:
        b -= st.multiplier_left * unpack(comm.recv(st.role.detached_row, kTagToLeft), r, Payload::rhs, 0).rhs;
        break;
      case DetachRole::Kind::right_neighbor:
        b -= st.multiplier_left * unpack(comm.recv(st.role.detached_row, kTagToRight), r, Payload::rhs, 0).rhs;
        break;
      case DetachRole::Kind::idle:
        break;
    }
  }
}

// Reattach stages in reverse order. `x` holds this rank's solution unless the
// rank was detached; `detached_rhs` overrides the stored record's rhs.
Dense reattach_all(Communicator& comm, const DetachSchedule& sched, const std::vector<Step>& steps, Dense x,
                   const Dense* detached_rhs) {
  for (std::size_t k = sched.stages.size(); k-- > 0;) {
    if (sched.stages[k].kind != StageKind::detach) continue;
    comm.stage_barrier(stage_label("reattach", k));
    const Step& st = steps[k];
    switch (st.role.kind) {
      case DetachRole::Kind::left_neighbor:
        comm.send(st.role.detached_row, kTagToRight, x);
        break;
      case DetachRole::Kind::right_neighbor:
        comm.send(st.role.detached_row, kTagToLeft, x);
        break;
      case DetachRole::Kind::detached: {
        const Dense xl = comm.recv(st.role.left, kTagToRight);
        const Dense xr = comm.recv(st.role.right, kTagToLeft);
        DetachRecord rec{st.record, st.role.left, st.role.right};
        if (detached_rhs) rec.row.rhs = *detached_rhs;
        if (xl.rows() != rec.row.rhs.rows() || xl.cols() != rec.row.rhs.cols() || xr.rows() != xl.rows() ||
            xr.cols() != xl.cols()) {
          throw ProtocolError("reattach: neighbor solution has the wrong shape");
        }
        x = reattach_step(rec, xl, xr);
        break;
      }
      case DetachRole::Kind::idle:
        break;
    }
  }
  return x;
}

void check_world(const Communicator& comm, const DetachSchedule& schedule) {
  if (comm.size() != schedule.ranks) {
    throw InvalidArgument("schedule built for " + std::to_string(schedule.ranks) + " ranks, communicator has " +
                          std::to_string(comm.size()));
  }
}

}  // namespace

ReducedSolver::ReducedSolver(Communicator& comm, const ReducedRow& row, DetachSchedule schedule)
    : schedule_(std::move(schedule)), r_(row.diag.rows()), rank_(comm.rank()) {
  check_world(comm, schedule_);
  check_row(row, r_);
  Working w{row, false};
  w.row.rhs = Dense{};
  w.row.owner = rank_;
  forward_blocks(comm, schedule_, w, steps_);
  detached_ = w.detached;
  if (!detached_) final_matrix_ = final_matrix(w.row, schedule_.cyclic);
}

Dense ReducedSolver::solve(Communicator& comm, const Dense& rhs) const {
  check_world(comm, schedule_);
  if (comm.rank() != rank_) throw InvalidArgument("reduced solver used from a different rank");
  if (rhs.rows() != r_) throw DimensionMismatch("reduced rhs must have r rows");
  Dense b = rhs;
  Dense detached_rhs;
  forward_rhs(comm, schedule_, steps_, b, detached_rhs);
  Dense x = detached_ ? Dense{} : dense_solve(final_matrix_, b);
  return reattach_all(comm, schedule_, steps_, std::move(x), detached_ ? &detached_rhs : nullptr);
}

Dense solve_reduced(Communicator& comm, const ReducedRow& row, const DetachSchedule& schedule) {
  check_world(comm, schedule);
  const std::size_t r = row.diag.rows();
  check_row(row, r);
  if (row.rhs.empty()) throw DimensionMismatch("one-shot reduced solve needs a right-hand side");
  Working w{row, false};
  w.row.owner = comm.rank();
  std::vector<Step> steps;
  forward_blocks(comm, schedule, w, steps);
  Dense x = w.detached ? Dense{} : decoupled_solve(w.row, schedule.cyclic);
  return reattach_all(comm, schedule, steps, std::move(x), nullptr);
}

}  // namespace cbsolve

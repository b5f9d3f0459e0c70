#include "cbsolve/solver.hpp"

#include <optional>

#include "cbsolve/errors.hpp"

namespace cbsolve {

namespace {

constexpr int kTagTail = 201;
constexpr int kTagRhsTail = 202;
constexpr int kTagInterface = 203;

struct Neighbors {
  std::optional<RankId> prev;
  std::optional<RankId> next;
  bool self_wrap = false;  // single cyclic rank: both neighbors are the rank itself
};

Neighbors neighbors_of(const Communicator& comm, bool cyclic) {
  const RankId me = comm.rank();
  const std::size_t p = comm.size();
  Neighbors nb;
  if (p == 1) {
    nb.self_wrap = cyclic;
    return nb;
  }
  if (me > 0 || cyclic) nb.prev = (me + p - 1) % p;
  if (me + 1 < p || cyclic) nb.next = (me + 1) % p;
  return nb;
}

Dense last_rows(const Dense& a, std::size_t r) { return a.block(a.rows() - r, 0, r, a.cols()); }

// Interfaces of this rank and its successor, then x_i.
RhsBatch finish(Communicator& comm, const LocalFactor& factor, const Neighbors& nb, const Dense& y,
                const Dense& own_iface) {
  comm.stage_barrier("backsub");
  if (nb.prev) comm.send(*nb.prev, kTagInterface, own_iface);
  Dense next_iface;
  if (nb.next) {
    next_iface = comm.recv(*nb.next, kTagInterface);
    if (next_iface.rows() != own_iface.rows() || next_iface.cols() != own_iface.cols()) {
      throw ProtocolError("interface solution from the next rank has the wrong shape");
    }
  } else if (nb.self_wrap) {
    next_iface = own_iface;
  } else {
    next_iface = Dense(own_iface.rows(), own_iface.cols());
  }
  const Dense x = back_substitute(factor, y, own_iface, next_iface);
  return gather_rows({own_iface, x});
}

void check_local_rhs(const LocalFactor& factor, const RhsBatch& rhs) {
  if (rhs.rows() != factor.r + factor.interior_rows()) {
    throw DimensionMismatch("local rhs must have r + N_i rows");
  }
}

ReducedSolver make_reduced(Communicator& comm, const LocalFactor& factor, bool cyclic) {
  const Neighbors nb = neighbors_of(comm, cyclic);
  comm.stage_barrier("assemble");
  std::optional<BoundaryTail> prev;
  if (nb.next) {
    const BoundaryTail t = factor.tail();
    comm.send(*nb.next, kTagTail, hcat({&t.own_response, &t.next_response}));
  }
  if (nb.prev) {
    const Dense msg = comm.recv(*nb.prev, kTagTail);
    const std::size_t r = factor.r;
    if (msg.rows() != r || msg.cols() != 2 * r) throw ProtocolError("boundary tail has the wrong shape");
    prev = BoundaryTail{msg.block(0, 0, r, r), msg.block(0, r, r, r), Dense{}};
  } else if (nb.self_wrap) {
    prev = factor.tail();
  }
  ReducedRow row = reduced_blocks(factor, prev);
  row.owner = comm.rank();
  return ReducedSolver(comm, row, build_schedule(comm.size(), cyclic));
}

}  // namespace

PartitionedSolver::PartitionedSolver(Communicator& comm, const LocalBlocks& blocks, bool cyclic)
    : cyclic_(cyclic), factor_(factorize_local(blocks)), reduced_(make_reduced(comm, factor_, cyclic)) {}

RhsBatch PartitionedSolver::solve(Communicator& comm, const RhsBatch& local_rhs) const {
  check_local_rhs(factor_, local_rhs);
  const std::size_t r = factor_.r;
  const std::size_t m = local_rhs.cols();
  const Neighbors nb = neighbors_of(comm, cyclic_);
  const Dense iface_rhs = local_rhs.block(0, 0, r, m);
  const Dense y = forward_rhs(factor_, local_rhs.block(r, 0, factor_.interior_rows(), m));

  comm.stage_barrier("assemble");
  if (nb.next) comm.send(*nb.next, kTagRhsTail, last_rows(y, r));
  std::optional<Dense> prev_y;
  if (nb.prev) {
    prev_y = comm.recv(*nb.prev, kTagRhsTail);
    if (prev_y->rows() != r || prev_y->cols() != m) throw ProtocolError("rhs tail has the wrong shape");
  } else if (nb.self_wrap) {
    prev_y = last_rows(y, r);
  }
  const Dense reduced_rhs_value = reduced_rhs(factor_, iface_rhs, y, prev_y);
  const Dense own_iface = reduced_.solve(comm, reduced_rhs_value);
  return finish(comm, factor_, nb, y, own_iface);
}

RhsBatch solve_partitioned(Communicator& comm, const LocalSystem& local, bool cyclic) {
  const LocalFactor factor = factorize_local(local.blocks);
  check_local_rhs(factor, local.rhs);
  const std::size_t r = factor.r;
  const std::size_t m = local.rhs.cols();
  const Neighbors nb = neighbors_of(comm, cyclic);
  const Dense iface_rhs = local.rhs.block(0, 0, r, m);
  const Dense y = forward_rhs(factor, local.rhs.block(r, 0, factor.interior_rows(), m));

  comm.stage_barrier("assemble");
  if (nb.next) {
    const BoundaryTail t = factor.tail();
    const Dense y_tail = last_rows(y, r);
    comm.send(*nb.next, kTagTail, hcat({&t.own_response, &t.next_response, &y_tail}));
  }
  std::optional<BoundaryTail> prev;
  if (nb.prev) {
    const Dense msg = comm.recv(*nb.prev, kTagTail);
    if (msg.rows() != r || msg.cols() != 2 * r + m) throw ProtocolError("boundary tail has the wrong shape");
    prev = BoundaryTail{msg.block(0, 0, r, r), msg.block(0, r, r, r), msg.block(0, 2 * r, r, m)};
  } else if (nb.self_wrap) {
    prev = factor.tail();
    prev->y = last_rows(y, r);
  }
  ReducedRow row = assemble_reduced(factor, prev, iface_rhs, y);
  row.owner = comm.rank();
  const Dense own_iface = solve_reduced(comm, row, build_schedule(comm.size(), cyclic));
  return finish(comm, factor, nb, y, own_iface);
}

RhsBatch solve_in_world(World& world, const BandedMatrix& a, const RhsBatch& b, const PartitionLayout& layout) {
  if (world.size() != layout.ranks()) throw InvalidArgument("world size differs from the layout's rank count");
  const std::vector<LocalSystem> locals = split_global(a, b, layout);
  std::vector<Dense> parts(layout.ranks());
  world.run([&](Communicator& comm) {
    parts[comm.rank()] = solve_partitioned(comm, locals[comm.rank()], layout.cyclic);
  });
  return gather_rows(parts);
}

}  // namespace cbsolve

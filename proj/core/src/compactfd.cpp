#include "cbsolve/compactfd.hpp"

#include <algorithm>
#include <string>

#include "cbsolve/errors.hpp"

namespace cbsolve {

namespace {

constexpr int kTagHaloToPrev = 301;
constexpr int kTagHaloToNext = 302;
constexpr std::size_t kHalo = 2;

// Four-point explicit stencil: out[k] = sum_t weight[t] * f[k + offset[t]].
struct Taps {
  std::array<int, 4> offset;
  std::array<double, 4> weight;
};

Taps taps_for(const SchemeSpec& s) {
  const double h = s.h;
  switch (s.kind) {
    case SchemeKind::collocated_d1_6:
      return {{1, -1, 2, -2}, {s.a / (2 * h), -s.a / (2 * h), s.b / (4 * h), -s.b / (4 * h)}};
    case SchemeKind::staggered_d1_6:
      if (s.direction == StaggerDirection::to_staggered) {
        return {{1, 0, 2, -1}, {s.a / h, -s.a / h, s.b / (3 * h), -s.b / (3 * h)}};
      }
      return {{0, -1, 1, -2}, {s.a / h, -s.a / h, s.b / (3 * h), -s.b / (3 * h)}};
    case SchemeKind::staggered_interp_6:
      if (s.direction == StaggerDirection::to_staggered) {
        return {{1, 0, 2, -1}, {s.a / 2, s.a / 2, s.b / 2, s.b / 2}};
      }
      return {{0, -1, 1, -2}, {s.a / 2, s.a / 2, s.b / 2, s.b / 2}};
  }
  throw InvalidArgument("unknown scheme");
}

void check_axis(int axis) {
  if (axis < 0 || axis > 2) throw InvalidArgument("axis " + std::to_string(axis) + " out of range");
}

std::size_t batch_of(const Field3::Dims& d, int axis) {
  std::size_t m = 1;
  for (int q = 0; q < 3; ++q) {
    if (q != axis) m *= d[static_cast<std::size_t>(q)];
  }
  return m;
}

// `ext` holds kHalo rows before and after the n local rows.
Dense apply_taps(const Taps& taps, const Dense& ext) {
  const std::size_t n = ext.rows() - 2 * kHalo;
  const std::size_t m = ext.cols();
  Dense out(n, m);
  for (std::size_t k = 0; k < n; ++k) {
    auto o = out.row(k);
    for (std::size_t t = 0; t < 4; ++t) {
      const auto src = ext.row(static_cast<std::size_t>(static_cast<long long>(k + kHalo) + taps.offset[t]));
      const double w = taps.weight[t];
      for (std::size_t c = 0; c < m; ++c) o[c] += w * src[c];
    }
  }
  return out;
}

Dense extend_periodic(const Dense& local) {
  const std::size_t n = local.rows();
  if (n == 0) throw InvalidArgument("empty field");
  Dense ext(n + 2 * kHalo, local.cols());
  for (std::size_t e = 0; e < ext.rows(); ++e) {
    const std::size_t src = (e + n * kHalo - kHalo) % n;
    const auto s = local.row(src);
    std::copy(s.begin(), s.end(), ext.row(e).begin());
  }
  return ext;
}

Dense extend_distributed(Communicator& comm, const Dense& local) {
  const std::size_t p = comm.size();
  if (p == 1) return extend_periodic(local);
  const std::size_t n = local.rows();
  if (n < kHalo) throw InvalidArgument("local extent smaller than the stencil halo");
  const RankId me = comm.rank();
  const RankId prev = (me + p - 1) % p;
  const RankId next = (me + 1) % p;
  comm.send(prev, kTagHaloToPrev, local.block(0, 0, kHalo, local.cols()));
  comm.send(next, kTagHaloToNext, local.block(n - kHalo, 0, kHalo, local.cols()));
  const Dense before = comm.recv(prev, kTagHaloToNext);
  const Dense after = comm.recv(next, kTagHaloToPrev);
  if (before.rows() != kHalo || after.rows() != kHalo || before.cols() != local.cols() ||
      after.cols() != local.cols()) {
    throw ProtocolError("halo plane has the wrong shape");
  }
  Dense ext(n + 2 * kHalo, local.cols());
  ext.set_block(0, 0, before);
  ext.set_block(kHalo, 0, local);
  ext.set_block(n + kHalo, 0, after);
  return ext;
}

}  // namespace

SchemeSpec SchemeSpec::make(SchemeKind kind, double h, StaggerDirection direction) {
  if (!(h > 0.0)) throw InvalidArgument("grid spacing must be positive");
  SchemeSpec s;
  s.kind = kind;
  s.h = h;
  s.direction = direction;
  switch (kind) {
    case SchemeKind::collocated_d1_6:
      s.alpha = 1.0 / 3.0;
      s.a = 14.0 / 9.0;
      s.b = 1.0 / 9.0;
      break;
    case SchemeKind::staggered_d1_6:
      s.alpha = 9.0 / 62.0;
      s.a = 63.0 / 62.0;
      s.b = 17.0 / 62.0;
      break;
    case SchemeKind::staggered_interp_6:
      s.alpha = 3.0 / 10.0;
      s.a = 3.0 / 2.0;
      s.b = 1.0 / 10.0;
      break;
  }
  return s;
}

BandedMatrix build_lhs(const SchemeSpec& spec, std::size_t n) {
  if (!spec.periodic) throw InvalidArgument("only periodic schemes are supported");
  if (n < 5) throw InvalidArgument("compact scheme needs at least 5 points, got " + std::to_string(n));
  const double stencil[3] = {spec.alpha, 1.0, spec.alpha};
  return BandedMatrix::uniform(n, stencil, true);
}

Field3::Field3(Dims dims, double fill) : dims_(dims), values_(dims[0] * dims[1] * dims[2], fill) {
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw InvalidArgument("field dimensions must be positive");
}

void gather_axis(const Field3& f, int axis, Dense& out, std::size_t col0) {
  check_axis(axis);
  const auto& d = f.dims();
  const std::size_t m = batch_of(d, axis);
  if (out.rows() != d[static_cast<std::size_t>(axis)] || out.cols() < col0 + m) {
    throw DimensionMismatch("gather_axis: batch has the wrong shape");
  }
  const auto v = f.values();
  if (axis == 0) {
    for (std::size_t i = 0; i < d[0]; ++i) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * m), m, out.row(i).begin() + static_cast<std::ptrdiff_t>(col0));
    }
  } else if (axis == 1) {
    for (std::size_t i = 0; i < d[0]; ++i) {
      for (std::size_t j = 0; j < d[1]; ++j) {
        auto o = out.row(j);
        const std::size_t base = (i * d[1] + j) * d[2];
        std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(base), d[2],
                    o.begin() + static_cast<std::ptrdiff_t>(col0 + i * d[2]));
      }
    }
  } else {
    for (std::size_t c = 0; c < d[0] * d[1]; ++c) {
      for (std::size_t k = 0; k < d[2]; ++k) out(k, col0 + c) = v[c * d[2] + k];
    }
  }
}

void scatter_axis(const Dense& in, int axis, std::size_t col0, Field3& f) {
  check_axis(axis);
  const auto& d = f.dims();
  const std::size_t m = batch_of(d, axis);
  if (in.rows() != d[static_cast<std::size_t>(axis)] || in.cols() < col0 + m) {
    throw DimensionMismatch("scatter_axis: batch has the wrong shape");
  }
  auto v = f.values();
  if (axis == 0) {
    for (std::size_t i = 0; i < d[0]; ++i) {
      const auto src = in.row(i);
      std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(col0), m, v.begin() + static_cast<std::ptrdiff_t>(i * m));
    }
  } else if (axis == 1) {
    for (std::size_t i = 0; i < d[0]; ++i) {
      for (std::size_t j = 0; j < d[1]; ++j) {
        const auto src = in.row(j);
        const std::size_t base = (i * d[1] + j) * d[2];
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(col0 + i * d[2]), d[2],
                    v.begin() + static_cast<std::ptrdiff_t>(base));
      }
    }
  } else {
    for (std::size_t c = 0; c < d[0] * d[1]; ++c) {
      for (std::size_t k = 0; k < d[2]; ++k) v[c * d[2] + k] = in(k, col0 + c);
    }
  }
}

Field3 apply_rhs(const SchemeSpec& spec, const Field3& field, int axis) {
  check_axis(axis);
  if (!spec.periodic) throw InvalidArgument("only periodic schemes are supported");
  Dense lines(field.dim(axis), batch_of(field.dims(), axis));
  gather_axis(field, axis, lines, 0);
  const Dense rhs = apply_taps(taps_for(spec), extend_periodic(lines));
  Field3 out(field.dims());
  scatter_axis(rhs, axis, 0, out);
  return out;
}

CompactOperator::CompactOperator(Communicator& comm, const SchemeSpec& spec, const PartitionLayout& layout)
    : spec_(spec),
      layout_(layout),
      solver_(comm, [&] {
        if (layout.ranks() != comm.size()) throw InvalidArgument("layout rank count differs from communicator size");
        if (layout.r != 1 || !layout.cyclic) throw InvalidArgument("compact operators need a cyclic r=1 layout");
        return split_matrix(build_lhs(spec, layout.global_rows()), layout)[comm.rank()];
      }(), true) {}

Field3 CompactOperator::apply(Communicator& comm, const Field3& field, int axis) const {
  const Field3* one[] = {&field};
  return std::move(apply(comm, one, axis).front());
}

std::vector<Field3> CompactOperator::apply(Communicator& comm, std::span<const Field3* const> fields, int axis) const {
  check_axis(axis);
  if (fields.empty()) return {};
  const auto& dims = fields.front()->dims();
  const std::size_t n_local = dims[static_cast<std::size_t>(axis)];
  if (n_local != layout_.local_rows(comm.rank())) {
    throw DimensionMismatch("field extent along axis " + std::to_string(axis) + " is " + std::to_string(n_local) +
                            ", layout assigns " + std::to_string(layout_.local_rows(comm.rank())));
  }
  const std::size_t m = batch_of(dims, axis);
  Dense lines(n_local, m * fields.size());
  for (std::size_t f = 0; f < fields.size(); ++f) {
    if (fields[f]->dims() != dims) throw DimensionMismatch("batched fields must share dimensions");
    gather_axis(*fields[f], axis, lines, f * m);
  }
  const Dense rhs = apply_taps(taps_for(spec_), extend_distributed(comm, lines));
  const Dense solved = solver_.solve(comm, rhs);
  std::vector<Field3> out;
  out.reserve(fields.size());
  for (std::size_t f = 0; f < fields.size(); ++f) {
    out.emplace_back(dims);
    scatter_axis(solved, axis, f * m, out.back());
  }
  return out;
}

Field3 derivative(const Field3& field, int axis, const SchemeSpec& spec, const PartitionLayout& layout,
                  Communicator& comm) {
  const CompactOperator op(comm, spec, layout);
  return op.apply(comm, field, axis);
}

}  // namespace cbsolve

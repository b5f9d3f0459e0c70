#include "cbsolve/partition.hpp"

#include <numeric>
#include <string>

#include "cbsolve/errors.hpp"

namespace cbsolve {

PartitionLayout PartitionLayout::equal(std::size_t n, std::size_t p, std::size_t r, bool cyclic) {
  if (p == 0) throw InvalidArgument("layout needs at least one rank");
  PartitionLayout out;
  out.r = r;
  out.cyclic = cyclic;
  const std::size_t base = n / p;
  const std::size_t extra = n % p;
  for (std::size_t i = 0; i < p; ++i) {
    const std::size_t rows = base + (i < extra ? 1 : 0);
    if (rows < 2 * r) {
      throw InvalidArgument("cannot split " + std::to_string(n) + " rows over " + std::to_string(p) +
                            " ranks: each rank needs at least " + std::to_string(2 * r) + " rows");
    }
    out.sizes.push_back(rows - r);
  }
  return out;
}

std::size_t PartitionLayout::global_rows() const noexcept {
  return std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}) + r * sizes.size();
}

std::size_t PartitionLayout::offset(std::size_t rank) const {
  if (rank > sizes.size()) throw InvalidArgument("rank outside layout");
  std::size_t off = 0;
  for (std::size_t i = 0; i < rank; ++i) off += sizes[i] + r;
  return off;
}

void PartitionLayout::validate() const {
  if (sizes.empty()) throw InvalidArgument("layout has no ranks");
  if (r == 0) throw InvalidArgument("half-bandwidth must be positive");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < r) {
      throw InvalidArgument("rank " + std::to_string(i) + " has " + std::to_string(sizes[i]) +
                            " interior rows; at least " + std::to_string(r) + " required");
    }
  }
}

Dense LocalBlocks::full_interior_lower() const {
  Dense out(interior_rows(), r);
  out.set_block(0, 0, interior_lower);
  return out;
}

Dense LocalBlocks::full_interior_upper() const {
  Dense out(interior_rows(), r);
  out.set_block(interior_rows() - r, 0, interior_upper);
  return out;
}

Dense LocalBlocks::full_iface_lower() const {
  Dense out(r, prev_size);
  if (prev_size > 0) out.set_block(0, prev_size - r, iface_lower);
  return out;
}

Dense LocalBlocks::full_iface_upper() const {
  Dense out(r, interior_rows());
  out.set_block(0, 0, iface_upper);
  return out;
}

namespace {

struct Location {
  long long rank;  // may be -1 or p after unwrapping a cyclic column
  bool iface;
  std::size_t index;  // within the interface block or the interior
};

class GlobalIndex {
 public:
  explicit GlobalIndex(const PartitionLayout& layout) : layout_(layout), n_(layout.global_rows()) {
    for (std::size_t i = 0; i <= layout.ranks(); ++i) offsets_.push_back(layout.offset(i));
  }

  long long n() const { return static_cast<long long>(n_); }
  std::size_t offset(std::size_t rank) const { return offsets_[rank]; }

  Location locate(long long u) const {
    long long shift = 0;
    const long long p = static_cast<long long>(layout_.ranks());
    if (u < 0) {
      u += n();
      shift = -p;
    } else if (u >= n()) {
      u -= n();
      shift = p;
    }
    std::size_t q = 0;
    while (offsets_[q + 1] <= static_cast<std::size_t>(u)) ++q;
    const std::size_t local = static_cast<std::size_t>(u) - offsets_[q];
    if (local < layout_.r) return {static_cast<long long>(q) + shift, true, local};
    return {static_cast<long long>(q) + shift, false, local - layout_.r};
  }

 private:
  const PartitionLayout& layout_;
  std::size_t n_;
  std::vector<std::size_t> offsets_;
};

[[noreturn]] void bad_coupling(std::size_t row, int t) {
  throw InvalidArgument("global row " + std::to_string(row) + " couples (offset " + std::to_string(t) +
                        ") beyond its neighboring partitions; partitions are too small");
}

}  // namespace

std::vector<LocalBlocks> split_matrix(const BandedMatrix& a, const PartitionLayout& layout) {
  layout.validate();
  const std::size_t p = layout.ranks();
  const std::size_t r = layout.r;
  if (a.size() != layout.global_rows()) {
    throw DimensionMismatch("matrix has " + std::to_string(a.size()) + " rows, layout covers " +
                            std::to_string(layout.global_rows()));
  }
  if (a.half_width() != r) throw DimensionMismatch("matrix half-bandwidth differs from layout");
  if (a.cyclic() != layout.cyclic) throw DimensionMismatch("matrix and layout disagree on cyclicity");

  const GlobalIndex index(layout);
  const int ri = static_cast<int>(r);
  std::vector<LocalBlocks> out(p);
  for (std::size_t i = 0; i < p; ++i) {
    LocalBlocks& blk = out[i];
    const std::size_t ni = layout.sizes[i];
    const long long me = static_cast<long long>(i);
    blk.rank = i;
    blk.r = r;
    blk.prev_size = (i > 0) ? layout.sizes[i - 1] : (layout.cyclic ? layout.sizes[p - 1] : 0);
    blk.interior = BandedMatrix(ni, a.width(), false);
    blk.interior_lower = Dense(r, r);
    blk.interior_upper = Dense(r, r);
    blk.iface_lower = Dense(r, r);
    blk.iface_diag = Dense(r, r);
    blk.iface_upper = Dense(r, r);

    const std::size_t off = index.offset(i);
    for (std::size_t k = 0; k < r + ni; ++k) {
      const std::size_t g = off + k;
      const bool iface_row = k < r;
      for (int t = -ri; t <= ri; ++t) {
        const long long u = static_cast<long long>(g) + t;
        if (!layout.cyclic && (u < 0 || u >= index.n())) continue;
        const double v = a.band(t, g);
        const Location loc = index.locate(u);
        if (iface_row) {
          if (loc.rank == me && loc.iface) {
            blk.iface_diag(k, loc.index) = v;
          } else if (loc.rank == me && loc.index < r) {
            blk.iface_upper(k, loc.index) = v;
          } else if (loc.rank == me - 1 && !loc.iface && loc.index + r >= blk.prev_size) {
            blk.iface_lower(k, loc.index + r - blk.prev_size) = v;
          } else if (v != 0.0) {
            bad_coupling(g, t);
          }
        } else {
          const std::size_t row = k - r;
          if (loc.rank == me && !loc.iface) {
            blk.interior.band(t, row) = v;
          } else if (loc.rank == me && loc.iface && row < r) {
            blk.interior_lower(row, loc.index) = v;
          } else if (loc.rank == me + 1 && loc.iface && row + r >= ni) {
            blk.interior_upper(row + r - ni, loc.index) = v;
          } else if (v != 0.0) {
            bad_coupling(g, t);
          }
        }
      }
    }
  }
  return out;
}

std::vector<Dense> split_rhs(const Dense& b, const PartitionLayout& layout) {
  layout.validate();
  if (b.rows() != layout.global_rows()) throw DimensionMismatch("rhs rows differ from layout");
  std::vector<Dense> out;
  for (std::size_t i = 0; i < layout.ranks(); ++i) {
    out.push_back(b.block(layout.offset(i), 0, layout.local_rows(i), b.cols()));
  }
  return out;
}

std::vector<LocalSystem> split_global(const BandedMatrix& a, const Dense& b, const PartitionLayout& layout) {
  auto blocks = split_matrix(a, layout);
  auto rhs = split_rhs(b, layout);
  std::vector<LocalSystem> out;
  for (std::size_t i = 0; i < blocks.size(); ++i) out.push_back({std::move(blocks[i]), std::move(rhs[i])});
  return out;
}

BandedMatrix reassemble(const std::vector<LocalBlocks>& blocks, const PartitionLayout& layout) {
  layout.validate();
  const std::size_t p = layout.ranks();
  const std::size_t r = layout.r;
  if (blocks.size() != p) throw DimensionMismatch("block count differs from layout");
  const long long n = static_cast<long long>(layout.global_rows());
  BandedMatrix out(layout.global_rows(), 2 * r + 1, layout.cyclic);

  auto put = [&](std::size_t g, long long col, double v) {
    const long long t = col - static_cast<long long>(g);
    if (t < -static_cast<long long>(r) || t > static_cast<long long>(r)) {
      // Corners of the r x r coupling blocks lie beyond the band and stay zero.
      if (v == 0.0) return;
      throw InvalidArgument("block entry lands outside the band");
    }
    if (!layout.cyclic && (col < 0 || col >= n)) {
      if (v != 0.0) throw InvalidArgument("acyclic block couples outside the matrix");
      return;
    }
    out.band(static_cast<int>(t), g) = v;
  };

  for (std::size_t i = 0; i < p; ++i) {
    const LocalBlocks& blk = blocks[i];
    const std::size_t ni = layout.sizes[i];
    const std::size_t off = layout.offset(i);
    const long long own_iface = static_cast<long long>(off);
    const long long own_interior = own_iface + static_cast<long long>(r);
    // Unwrapped positions of the neighbors' rows.
    const long long prev_interior_end = own_iface;  // one past the last row of x_{i-1}
    const long long next_iface = own_interior + static_cast<long long>(ni);

    for (std::size_t a = 0; a < r; ++a) {
      const std::size_t g = off + a;
      for (std::size_t c = 0; c < r; ++c) {
        put(g, own_iface + static_cast<long long>(c), blk.iface_diag(a, c));
        put(g, own_interior + static_cast<long long>(c), blk.iface_upper(a, c));
        if (blk.prev_size > 0) {
          put(g, prev_interior_end - static_cast<long long>(r) + static_cast<long long>(c), blk.iface_lower(a, c));
        }
      }
    }
    for (std::size_t k = 0; k < ni; ++k) {
      const std::size_t g = off + r + k;
      const int ri = static_cast<int>(r);
      for (int t = -ri; t <= ri; ++t) {
        const long long col = static_cast<long long>(k) + t;
        if (col < 0 || col >= static_cast<long long>(ni)) continue;
        out.band(t, g) = blk.interior.band(t, k);
      }
    }
    for (std::size_t a = 0; a < r; ++a) {
      for (std::size_t c = 0; c < r; ++c) {
        put(off + r + a, own_iface + static_cast<long long>(c), blk.interior_lower(a, c));
        put(off + r + ni - r + a, next_iface + static_cast<long long>(c), blk.interior_upper(a, c));
      }
    }
  }
  return out;
}

Dense gather_rows(const std::vector<Dense>& parts) {
  std::size_t rows = 0;
  const std::size_t cols = parts.empty() ? 0 : parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw DimensionMismatch("gather_rows: column counts differ");
    rows += p.rows();
  }
  Dense out(rows, cols);
  std::size_t r0 = 0;
  for (const auto& p : parts) {
    out.set_block(r0, 0, p);
    r0 += p.rows();
  }
  return out;
}

BoundaryTail LocalFactor::tail() const {
  const std::size_t n = interior_rows();
  return {own_response.block(n - r, 0, r, r), next_response.block(n - r, 0, r, r), Dense{}};
}

LocalFactor factorize_local(const LocalBlocks& blocks) {
  if (blocks.interior_rows() < blocks.r) throw InvalidArgument("interior smaller than the half-bandwidth");
  LocalFactor f;
  f.r = blocks.r;
  f.interior = PcrFactor(blocks.interior);
  f.own_response = f.interior.solve(blocks.full_interior_lower());
  f.next_response = f.interior.solve(blocks.full_interior_upper());
  f.iface_lower = blocks.iface_lower;
  f.iface_diag = blocks.iface_diag;
  f.iface_upper = blocks.iface_upper;
  return f;
}

RhsBatch forward_rhs(const LocalFactor& factor, const RhsBatch& b) {
  if (b.rows() != factor.interior_rows()) throw DimensionMismatch("forward_rhs: rhs rows differ from interior");
  return factor.interior.solve(b);
}

namespace {

void require_prev(const LocalFactor& factor, bool present) {
  if (!present && factor.iface_lower.max_abs() != 0.0) {
    throw InvalidArgument("missing neighbor data: interface couples to a previous partition");
  }
}

}  // namespace

ReducedRow reduced_blocks(const LocalFactor& factor, const std::optional<BoundaryTail>& prev) {
  const std::size_t r = factor.r;
  require_prev(factor, prev.has_value());
  ReducedRow row;
  const Dense s_head = factor.own_response.block(0, 0, r, r);
  const Dense r_head = factor.next_response.block(0, 0, r, r);
  row.diag = factor.iface_diag - factor.iface_upper * s_head;
  row.upper = -1.0 * (factor.iface_upper * r_head);
  if (prev) {
    if (prev->own_response.rows() != r || prev->next_response.rows() != r) {
      throw DimensionMismatch("neighbor tail must have r rows");
    }
    row.lower = -1.0 * (factor.iface_lower * prev->own_response);
    row.diag -= factor.iface_lower * prev->next_response;
  } else {
    row.lower = Dense(r, r);
  }
  return row;
}

Dense reduced_rhs(const LocalFactor& factor, const Dense& iface_rhs, const Dense& y,
                  const std::optional<Dense>& prev_y_tail) {
  const std::size_t r = factor.r;
  require_prev(factor, prev_y_tail.has_value());
  if (iface_rhs.rows() != r || y.rows() != factor.interior_rows() || iface_rhs.cols() != y.cols()) {
    throw DimensionMismatch("reduced_rhs: inconsistent right-hand-side shapes");
  }
  Dense out = iface_rhs - factor.iface_upper * y.block(0, 0, r, y.cols());
  if (prev_y_tail) out -= factor.iface_lower * *prev_y_tail;
  return out;
}

ReducedRow assemble_reduced(const LocalFactor& factor, const std::optional<BoundaryTail>& prev, const Dense& iface_rhs,
                            const Dense& y) {
  ReducedRow row = reduced_blocks(factor, prev);
  std::optional<Dense> prev_y;
  if (prev) {
    if (prev->y.empty()) throw InvalidArgument("missing neighbor data: tail carries no y rows");
    prev_y = prev->y;
  }
  row.rhs = reduced_rhs(factor, iface_rhs, y, prev_y);
  return row;
}

RhsBatch back_substitute(const LocalFactor& factor, const RhsBatch& y, const Dense& own_iface, const Dense& next_iface) {
  const std::size_t r = factor.r;
  if (y.rows() != factor.interior_rows() || own_iface.rows() != r || next_iface.rows() != r ||
      own_iface.cols() != y.cols() || next_iface.cols() != y.cols()) {
    throw DimensionMismatch("back_substitute: inconsistent shapes");
  }
  Dense x = y;
  x -= factor.own_response * own_iface;
  x -= factor.next_response * next_iface;
  return x;
}

}  // namespace cbsolve

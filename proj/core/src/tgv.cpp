#include "cbsolve/tgv.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cbsolve/errors.hpp"

namespace cbsolve {

double FlowConfig::mach() const {
  if (!(p_ref > 0.0) || !(rho0 > 0.0)) throw InvalidArgument("reference pressure and density must be positive");
  return velocity / std::sqrt(gamma * p_ref / rho0);
}

FlowState axpy(const FlowState& y, double a, const FlowState& k) {
  FlowState out = y;
  for (std::size_t c = 0; c < out.q.size(); ++c) {
    auto dst = out.q[c].values();
    const auto src = k.q[c].values();
    if (dst.size() != src.size()) throw DimensionMismatch("axpy: states have different shapes");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += a * src[i];
  }
  return out;
}

SlabGeometry::SlabGeometry(std::size_t n_points, double length, std::size_t ranks, RankId rank)
    : n(n_points), h(2.0 * std::numbers::pi * length / static_cast<double>(n_points)) {
  if (n < 16) throw InvalidArgument("the flow solver needs at least 16 points per axis, got " + std::to_string(n));
  if (rank >= ranks) throw InvalidArgument("rank outside the world");
  layout = PartitionLayout::equal(n, ranks, 1, true);
  x_offset = layout.offset(rank);
  local_dims = {layout.local_rows(rank), n, n};
}

FlowState init_taylor_green(const FlowConfig& config, const SlabGeometry& geometry) {
  const auto& dims = geometry.local_dims;
  FlowState s;
  for (auto& f : s.q) f = Field3(dims);
  const double l = config.length;
  const double v0 = config.velocity;
  for (std::size_t i = 0; i < dims[0]; ++i) {
    const double x = static_cast<double>(geometry.x_offset + i) * geometry.h;
    for (std::size_t j = 0; j < dims[1]; ++j) {
      const double y = static_cast<double>(j) * geometry.h;
      for (std::size_t k = 0; k < dims[2]; ++k) {
        const double z = static_cast<double>(k) * geometry.h;
        const double u = v0 * std::sin(x / l) * std::cos(y / l) * std::cos(z / l);
        const double v = -v0 * std::cos(x / l) * std::sin(y / l) * std::cos(z / l);
        const double w = 0.0;
        const double p = config.p_ref + config.rho0 * v0 * v0 / 16.0 * (std::cos(2 * x / l) + std::cos(2 * y / l)) *
                                            (std::cos(2 * z / l) + 2.0);
        const double rho = config.rho0;
        const double e = p / (rho * (config.gamma - 1.0));
        s.rho()(i, j, k) = rho;
        s.momentum(0)(i, j, k) = rho * u;
        s.momentum(1)(i, j, k) = rho * v;
        s.momentum(2)(i, j, k) = rho * w;
        s.energy()(i, j, k) = rho * (e + 0.5 * (u * u + v * v + w * w));
      }
    }
  }
  return s;
}

FlowSolver::FlowSolver(Communicator& comm, const FlowConfig& config, std::size_t n)
    : comm_(comm), config_(config), geometry_(n, config.length, comm.size(), comm.rank()) {
  const PartitionLayout local = PartitionLayout::equal(n, 1, 1, true);
  for (int axis = 0; axis < 3; ++axis) {
    Communicator& c = comm_for(axis);
    const PartitionLayout& layout = axis == 0 ? geometry_.layout : local;
    const double h = geometry_.h;
    auto& ops = ops_[static_cast<std::size_t>(axis)];
    ops.interp = std::make_unique<CompactOperator>(
        c, SchemeSpec::make(SchemeKind::staggered_interp_6, h, StaggerDirection::to_staggered), layout);
    ops.to_stag = std::make_unique<CompactOperator>(
        c, SchemeSpec::make(SchemeKind::staggered_d1_6, h, StaggerDirection::to_staggered), layout);
    ops.to_coll = std::make_unique<CompactOperator>(
        c, SchemeSpec::make(SchemeKind::staggered_d1_6, h, StaggerDirection::to_collocated), layout);
    ops.collocated = std::make_unique<CompactOperator>(c, SchemeSpec::make(SchemeKind::collocated_d1_6, h), layout);
  }
}

std::array<std::array<Field3, 3>, 3> FlowSolver::velocity_gradient(const std::array<Field3, 3>& u) {
  std::array<std::array<Field3, 3>, 3> grad;
  const Field3* fields[] = {&u[0], &u[1], &u[2]};
  for (int k = 0; k < 3; ++k) {
    auto d = ops_[static_cast<std::size_t>(k)].collocated->apply(comm_for(k), fields, k);
    for (std::size_t j = 0; j < 3; ++j) grad[j][static_cast<std::size_t>(k)] = std::move(d[j]);
  }
  return grad;
}

namespace {

struct Primitives {
  std::array<Field3, 3> u;
  Field3 pressure;
  Field3 temperature;
};

Primitives recover(const FlowState& s, const FlowConfig& config) {
  const auto& dims = s.rho().dims();
  Primitives p;
  for (auto& f : p.u) f = Field3(dims);
  p.pressure = Field3(dims);
  p.temperature = Field3(dims);
  const auto rho = s.rho().values();
  const auto energy = s.energy().values();
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double r = rho[i];
    if (!(r > 0.0)) throw NonPhysicalState("non-positive density " + std::to_string(r));
    double ke = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double v = s.momentum(a).values()[i] / r;
      p.u[static_cast<std::size_t>(a)].values()[i] = v;
      ke += v * v;
    }
    const double pressure = (config.gamma - 1.0) * (energy[i] - 0.5 * r * ke);
    if (!(pressure > 0.0)) throw NonPhysicalState("non-positive pressure " + std::to_string(pressure));
    p.pressure.values()[i] = pressure;
    p.temperature.values()[i] = pressure / (r * config.gas_constant);
  }
  return p;
}

}  // namespace

FlowState FlowSolver::rhs(const FlowState& state) {
  const auto& dims = geometry_.local_dims;
  if (state.rho().dims() != dims) throw DimensionMismatch("state does not match this rank's slab");
  const Primitives prim = recover(state, config_);
  const auto grad = velocity_gradient(prim.u);  // grad[j][k] = d u_j / d x_k
  const double gm1 = config_.gamma - 1.0;
  const double mu = config_.viscosity();
  const double kappa = config_.conductivity();
  const double lambda = config_.bulk_viscosity - 2.0 / 3.0 * mu;

  FlowState out;
  for (auto& f : out.q) f = Field3(dims);

  for (int d = 0; d < 3; ++d) {
    const auto ud = static_cast<std::size_t>(d);
    std::array<std::size_t, 2> others{};
    for (std::size_t k = 0, t = 0; k < 3; ++k) {
      if (k != ud) others[t++] = k;
    }
    // Interpolated to staggered points along d: rho, u, v, w, P, T, then the
    // tangential gradients d u_d / d x_k and d u_k / d x_k for k != d.
    const Field3* coll[] = {&state.rho(),       &prim.u[0],           &prim.u[1],
                            &prim.u[2],         &prim.pressure,       &prim.temperature,
                            &grad[ud][others[0]], &grad[ud][others[1]], &grad[others[0]][others[0]],
                            &grad[others[1]][others[1]]};
    const auto stag = ops_[ud].interp->apply(comm_for(d), coll, d);
    const Field3* normal_in[] = {&prim.u[0], &prim.u[1], &prim.u[2], &prim.temperature};
    const auto normal = ops_[ud].to_stag->apply(comm_for(d), normal_in, d);  // d/dx_d of u, v, w, T

    std::array<Field3, 5> flux;
    for (auto& f : flux) f = Field3(dims);
    const std::size_t count = stag[0].size();
    for (std::size_t i = 0; i < count; ++i) {
      const double rho = stag[0].values()[i];
      const double u[3] = {stag[1].values()[i], stag[2].values()[i], stag[3].values()[i]};
      const double p = stag[4].values()[i];
      // g_row[j] = d u_j / d x_d, g_col[j] = d u_d / d x_j
      double g_row[3];
      double g_col[3];
      for (std::size_t j = 0; j < 3; ++j) g_row[j] = normal[j].values()[i];
      g_col[ud] = g_row[ud];
      g_col[others[0]] = stag[6].values()[i];
      g_col[others[1]] = stag[7].values()[i];
      const double div = g_row[ud] + stag[8].values()[i] + stag[9].values()[i];
      const double dT = normal[3].values()[i];

      double sigma[3];
      for (std::size_t j = 0; j < 3; ++j) sigma[j] = mu * (g_row[j] + g_col[j]) + (j == ud ? lambda * div : 0.0);
      const double ke = 0.5 * rho * (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]);
      const double un = u[ud];
      flux[0].values()[i] = rho * un;
      for (std::size_t j = 0; j < 3; ++j) {
        flux[1 + j].values()[i] = rho * un * u[j] + (j == ud ? p : 0.0) - sigma[j];
      }
      flux[4].values()[i] = un * (p / gm1 + ke + p) - kappa * dT - (u[0] * sigma[0] + u[1] * sigma[1] + u[2] * sigma[2]);
    }
    const Field3* flux_in[] = {&flux[0], &flux[1], &flux[2], &flux[3], &flux[4]};
    const auto divergence = ops_[ud].to_coll->apply(comm_for(d), flux_in, d);
    for (std::size_t c = 0; c < 5; ++c) {
      auto dst = out.q[c].values();
      const auto src = divergence[c].values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= src[i];
    }
  }
  return out;
}

FlowState FlowSolver::rk4_step(const FlowState& state, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  return rk4_advance(state, dt, [this](const FlowState& s) { return rhs(s); });
}

double FlowSolver::stable_dt(const FlowState& state) {
  const Primitives prim = recover(state, config_);
  const auto rho = state.rho().values();
  double fastest = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    double speed2 = 0.0;
    for (const auto& f : prim.u) speed2 += f.values()[i] * f.values()[i];
    const double c = std::sqrt(config_.gamma * prim.pressure.values()[i] / rho[i]);
    fastest = std::max(fastest, std::sqrt(speed2) + c);
  }
  const double local[] = {fastest};
  const double global = allreduce_max(comm_, local)[0];
  return config_.cfl * geometry_.h / global;
}

FlowDiagnostics FlowSolver::diagnostics(const FlowState& state) {
  const Primitives prim = recover(state, config_);
  const auto grad = velocity_gradient(prim.u);
  const auto rho = state.rho().values();
  std::vector<double> sums(7, 0.0);  // mass, momentum x3, energy, kinetic energy, enstrophy
  for (std::size_t i = 0; i < rho.size(); ++i) {
    sums[0] += rho[i];
    double speed2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      sums[1 + static_cast<std::size_t>(a)] += state.momentum(a).values()[i];
      const double v = prim.u[static_cast<std::size_t>(a)].values()[i];
      speed2 += v * v;
    }
    sums[4] += state.energy().values()[i];
    sums[5] += 0.5 * rho[i] * speed2;
    const double wx = grad[2][1].values()[i] - grad[1][2].values()[i];
    const double wy = grad[0][2].values()[i] - grad[2][0].values()[i];
    const double wz = grad[1][0].values()[i] - grad[0][1].values()[i];
    sums[6] += 0.5 * rho[i] * (wx * wx + wy * wy + wz * wz);
  }
  const std::vector<double> total = allreduce_sum(comm_, sums);
  const double cell = geometry_.h * geometry_.h * geometry_.h;
  FlowDiagnostics out;
  out.mass = total[0] * cell;
  for (std::size_t a = 0; a < 3; ++a) out.momentum[a] = total[1 + a] * cell;
  out.total_energy = total[4] * cell;
  out.kinetic_energy = total[5] * cell;
  out.enstrophy = total[6] * cell;
  return out;
}

}  // namespace cbsolve

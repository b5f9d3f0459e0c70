#pragma once

#include <array>
#include <cstddef>
#include <memory>

#include "cbsolve/compactfd.hpp"
#include "cbsolve/partition.hpp"
#include "cbsolve/transport.hpp"

namespace cbsolve {

/// Physical and numerical parameters of the compressible Taylor-Green vortex.
struct FlowConfig {
  double reynolds = 1600.0;
  double prandtl = 0.7;
  double gamma = 5.0 / 3.0;
  double gas_constant = 1.0;
  double rho0 = 1.0;
  double velocity = 1.0;
  double length = 1.0;
  double p_ref = 100.0;
  double bulk_viscosity = 0.0;
  double cfl = 0.5;

  double viscosity() const noexcept { return rho0 * velocity * length / reynolds; }
  double conductivity() const noexcept {
    return gamma * gas_constant * viscosity() / ((gamma - 1.0) * prandtl);
  }
  double mach() const;
};

/// Conservative variables on this rank's slab of the collocated grid:
/// rho, rho*u, rho*v, rho*w, rho*E with E = e + |u|^2/2.
struct FlowState {
  std::array<Field3, 5> q;

  Field3& rho() { return q[0]; }
  const Field3& rho() const { return q[0]; }
  Field3& momentum(int axis) { return q.at(static_cast<std::size_t>(1 + axis)); }
  const Field3& momentum(int axis) const { return q.at(static_cast<std::size_t>(1 + axis)); }
  Field3& energy() { return q[4]; }
  const Field3& energy() const { return q[4]; }
};

/// y + a * k, field by field.
FlowState axpy(const FlowState& y, double a, const FlowState& k);

/// Classical four-stage Runge-Kutta step for any state type with an
/// `axpy(y, a, k)` overload.
template <class State, class Rhs>
State rk4_advance(const State& y, double dt, Rhs&& f) {
  const State k1 = f(y);
  const State k2 = f(axpy(y, dt / 2, k1));
  const State k3 = f(axpy(y, dt / 2, k2));
  const State k4 = f(axpy(y, dt, k3));
  State out = axpy(y, dt / 6, k1);
  out = axpy(out, dt / 3, k2);
  out = axpy(out, dt / 3, k3);
  return axpy(out, dt / 6, k4);
}

struct FlowDiagnostics {
  double mass = 0.0;
  std::array<double, 3> momentum{0.0, 0.0, 0.0};
  double total_energy = 0.0;
  double kinetic_energy = 0.0;
  double enstrophy = 0.0;
};

/// Slab of the periodic cube [0, 2*pi*l)^3 held by one rank: the grid is
/// split along x, y and z stay local.
struct SlabGeometry {
  std::size_t n = 0;
  double h = 0.0;
  PartitionLayout layout;
  std::size_t x_offset = 0;
  Field3::Dims local_dims{0, 0, 0};

  SlabGeometry(std::size_t n, double length, std::size_t ranks, RankId rank);
};

/// Taylor-Green initial condition on a slab.
FlowState init_taylor_green(const FlowConfig& config, const SlabGeometry& geometry);

/// Compressible Navier-Stokes right-hand side and time stepping on one rank.
///
/// Fluxes are formed at staggered points: primitives are interpolated,
/// normal gradients come from the staggered derivative and tangential
/// gradients from the collocated derivative followed by interpolation.
/// The divergence uses the staggered derivative back to collocated points.
/// Every member taking a state is collective over the communicator.
class FlowSolver {
 public:
  FlowSolver(Communicator& comm, const FlowConfig& config, std::size_t n);

  const FlowConfig& config() const noexcept { return config_; }
  const SlabGeometry& geometry() const noexcept { return geometry_; }

  FlowState initial_state() const { return init_taylor_green(config_, geometry_); }

  /// Throws NonPhysicalState when density or pressure is not positive.
  FlowState rhs(const FlowState& state);
  FlowState rk4_step(const FlowState& state, double dt);
  /// cfl * h / max(|u| + c) over the whole domain.
  double stable_dt(const FlowState& state);
  FlowDiagnostics diagnostics(const FlowState& state);

 private:
  struct AxisOps {
    std::unique_ptr<CompactOperator> interp;      // collocated -> staggered
    std::unique_ptr<CompactOperator> to_stag;     // d/dx, collocated -> staggered
    std::unique_ptr<CompactOperator> to_coll;     // d/dx, staggered -> collocated
    std::unique_ptr<CompactOperator> collocated;  // d/dx, collocated -> collocated
  };

  Communicator& comm_for(int axis) { return axis == 0 ? comm_ : self_; }
  std::array<std::array<Field3, 3>, 3> velocity_gradient(const std::array<Field3, 3>& u);

  Communicator& comm_;
  SelfCommunicator self_;
  FlowConfig config_;
  SlabGeometry geometry_;
  std::array<AxisOps, 3> ops_;
};

}  // namespace cbsolve

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "stlpde/errors.hpp"
#include "stlpde/semantics.hpp"
#include "stlpde/system.hpp"

namespace stlpde {

/// Tridiagonal matrix stored by diagonals; lower[0] and upper[n-1] are unused.
struct Tridiagonal {
  std::vector<double> lower;
  std::vector<double> diag;
  std::vector<double> upper;

  explicit Tridiagonal(std::size_t n = 0) : lower(n, 0.0), diag(n, 0.0), upper(n, 0.0) {}

  std::size_t size() const { return diag.size(); }

  double at(std::size_t i, std::size_t j) const {
    if (i == j) return diag[i];
    if (j + 1 == i) return lower[i];
    if (i + 1 == j) return upper[i];
    return 0.0;
  }

  std::vector<double> apply(std::span<const double> x) const {
    const std::size_t n = size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = diag[i] * x[i];
      if (i > 0) s += lower[i] * x[i - 1];
      if (i + 1 < n) s += upper[i] * x[i + 1];
      y[i] = s;
    }
    return y;
  }

  /// this + s * other
  Tridiagonal plus_scaled(const Tridiagonal& other, double s) const {
    Tridiagonal out = *this;
    for (std::size_t i = 0; i < size(); ++i) {
      out.lower[i] += s * other.lower[i];
      out.diag[i] += s * other.diag[i];
      out.upper[i] += s * other.upper[i];
    }
    return out;
  }
};

/// Thomas algorithm.
inline std::vector<double> solve_tridiagonal(const Tridiagonal& a, std::span<const double> rhs) {
  const std::size_t n = a.size();
  std::vector<double> c(n, 0.0);
  std::vector<double> x(rhs.begin(), rhs.end());
  double scale = 0.0;
  for (double d : a.diag) scale = std::max(scale, std::fabs(d));
  const double tiny = 1e-14 * std::max(scale, 1e-300);

  double pivot = a.diag[0];
  if (std::fabs(pivot) <= tiny) throw SingularSystem("zero pivot in row 0");
  c[0] = n > 1 ? a.upper[0] / pivot : 0.0;
  x[0] /= pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = a.diag[i] - a.lower[i] * c[i - 1];
    if (std::fabs(pivot) <= tiny) throw SingularSystem("zero pivot in row " + std::to_string(i));
    c[i] = i + 1 < n ? a.upper[i] / pivot : 0.0;
    x[i] = (x[i] - a.lower[i] * x[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) x[i] -= c[i] * x[i + 1];
  return x;
}

/// Global FEM matrices for linear hat elements. `mass` carries rho*c (heat) or
/// rho (wave); `stiffness` carries kappa (heat) or E (wave). The control
/// enters the load vector at `load_node`.
struct Assembly {
  Tridiagonal mass;
  Tridiagonal stiffness;
  std::size_t load_node = 0;
};

inline Assembly assemble(const PdeSystem& sys, const Discretization& disc) {
  sys.check();
  disc.check();
  const std::size_t n = disc.nx + 1;
  const double h = disc.dx(sys);
  Assembly out{Tridiagonal(n), Tridiagonal(n), disc.nx};
  for (std::size_t e = 0; e < disc.nx; ++e) {
    const double mid = (static_cast<double>(e) + 0.5) * h;
    const Material& m = sys.material_at(mid);
    const double mass_coef = sys.kind == PdeKind::Heat ? m.rho * m.c : m.rho;
    const double stiff_coef = sys.kind == PdeKind::Heat ? m.kappa : m.E;

    const double k = stiff_coef / h;
    out.stiffness.diag[e] += k;
    out.stiffness.diag[e + 1] += k;
    out.stiffness.upper[e] -= k;
    out.stiffness.lower[e + 1] -= k;

    const double w = mass_coef * h;
    if (disc.mass == MassMatrix::Consistent) {
      out.mass.diag[e] += w / 3.0;
      out.mass.diag[e + 1] += w / 3.0;
      out.mass.upper[e] += w / 6.0;
      out.mass.lower[e + 1] += w / 6.0;
    } else {
      out.mass.diag[e] += w / 2.0;
      out.mass.diag[e + 1] += w / 2.0;
    }
  }
  return out;
}

/// Boundary flux (heat) or force (wave) per time step; values[k] drives the
/// step from ts[k] to ts[k+1].
struct ControlTrajectory {
  std::vector<double> values;
  double q_max = 0.0;

  bool within_bounds(double slack = 0.0) const {
    for (double v : values)
      if (std::fabs(v) > q_max + slack) return false;
    return true;
  }
};

/// Left-hand matrix of one implicit step with the Dirichlet row at node 0
/// replaced by the identity: M + dt K (heat) or M + dt^2 K (wave, velocity form).
inline Tridiagonal step_matrix(const PdeSystem& sys, const Assembly& asmb, double dt) {
  const double s = sys.kind == PdeKind::Heat ? dt : dt * dt;
  Tridiagonal a = asmb.mass.plus_scaled(asmb.stiffness, s);
  a.diag[0] = 1.0;
  a.upper[0] = 0.0;
  return a;
}

/// Implicit Euler in time. Heat: (M + dt K) u' = M u + dt F'. Wave, as the
/// first-order system u' = u + dt v', (M + dt^2 K) v' = M v - dt K u + dt F'.
inline Trajectory simulate(const PdeSystem& sys, const Discretization& disc, const ControlTrajectory& ctrl,
                           std::span<const double> u_init) {
  const Assembly asmb = assemble(sys, disc);
  const std::size_t n = disc.nx + 1;
  if (u_init.size() != n) throw ConfigError("initial profile must have nx+1 values");
  if (ctrl.values.size() != disc.nt) throw ConfigError("control must have one value per time step");
  if (std::fabs(u_init[0] - sys.g0) > 1e-9 * std::max(1.0, std::fabs(sys.g0)))
    throw ConfigError("initial profile must equal g0 at x=0");

  const double dt = disc.dt(sys);
  Trajectory traj{node_coordinates(sys, disc), time_instants(sys, disc), {}};
  traj.u.assign((disc.nt + 1) * n, 0.0);
  std::copy(u_init.begin(), u_init.end(), traj.u.begin());
  traj.at(0, 0) = sys.g0;

  const Tridiagonal a = step_matrix(sys, asmb, dt);
  std::vector<double> u(u_init.begin(), u_init.end());
  u[0] = sys.g0;

  if (sys.kind == PdeKind::Heat) {
    for (std::size_t k = 0; k < disc.nt; ++k) {
      std::vector<double> rhs = asmb.mass.apply(u);
      rhs[asmb.load_node] += dt * ctrl.values[k];
      rhs[0] = sys.g0;
      u = solve_tridiagonal(a, rhs);
      std::copy(u.begin(), u.end(), traj.u.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
    }
    return traj;
  }

  std::vector<double> v(n, 0.0);
  for (std::size_t k = 0; k < disc.nt; ++k) {
    std::vector<double> rhs = asmb.mass.apply(v);
    const std::vector<double> ku = asmb.stiffness.apply(u);
    for (std::size_t i = 0; i < n; ++i) rhs[i] -= dt * ku[i];
    rhs[asmb.load_node] += dt * ctrl.values[k];
    rhs[0] = 0.0;
    v = solve_tridiagonal(a, rhs);
    for (std::size_t i = 0; i < n; ++i) u[i] += dt * v[i];
    u[0] = sys.g0;
    std::copy(u.begin(), u.end(), traj.u.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
  }
  return traj;
}

inline Trajectory simulate(const PdeSystem& sys, const Discretization& disc, const ControlTrajectory& ctrl) {
  const auto u_init = sys.u0.on_nodes(disc.nx);
  return simulate(sys, disc, ctrl, u_init);
}

/// Index of the grid step nearest `t`, ties going to the later step.
inline std::size_t nearest_step(std::span<const double> ts, double t) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < ts.size(); ++k)
    if (std::fabs(ts[k] - t) <= std::fabs(ts[best] - t)) best = k;
  return best;
}

inline std::vector<double> final_state(const Trajectory& traj, double t_s) {
  const auto row = traj.row(nearest_step(traj.ts, t_s));
  return {row.begin(), row.end()};
}

}  // namespace stlpde

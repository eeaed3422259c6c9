#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "stlpde/errors.hpp"
#include "stlpde/stl.hpp"

namespace stlpde {

enum class PdeKind { Heat, Wave };

inline const char* to_string(PdeKind kind) { return kind == PdeKind::Heat ? "heat" : "wave"; }

/// One material segment ending at `x_end`. Heat uses (rho, c, kappa), wave
/// uses (rho, E); the unused constants are ignored.
struct Material {
  double x_end = 0.0;
  double rho = 0.0;
  double c = 0.0;
  double kappa = 0.0;
  double E = 0.0;

  bool operator==(const Material&) const = default;
};

/// Initial profile, either constant or sampled on uniformly spaced nodes.
struct InitialProfile {
  std::optional<double> constant;
  std::vector<double> nodes;

  static InitialProfile uniform(double v) { return {v, {}}; }
  static InitialProfile sampled(std::vector<double> values) { return {std::nullopt, std::move(values)}; }

  /// Values at the nx+1 nodes of a uniform mesh on [0, length]; node lists of
  /// a different size are linearly interpolated.
  std::vector<double> on_nodes(std::size_t nx) const {
    if (constant) return std::vector<double>(nx + 1, *constant);
    if (nodes.empty()) throw ConfigError("initial profile has no values");
    if (nodes.size() == nx + 1) return nodes;
    std::vector<double> out(nx + 1);
    if (nodes.size() == 1) {
      out.assign(nx + 1, nodes[0]);
      return out;
    }
    const double src_cells = static_cast<double>(nodes.size() - 1);
    for (std::size_t i = 0; i <= nx; ++i) {
      const double s = static_cast<double>(i) / static_cast<double>(nx) * src_cells;
      const auto j = std::min(static_cast<std::size_t>(s), nodes.size() - 2);
      const double w = s - static_cast<double>(j);
      out[i] = (1.0 - w) * nodes[j] + w * nodes[j + 1];
    }
    return out;
  }

  bool operator==(const InitialProfile&) const = default;
};

inline constexpr double kDefaultHeatControlBound = 1e6;
inline constexpr double kDefaultWaveControlBound = 50.0;
inline constexpr double kDefaultHeatStateRange = 200.0;
inline constexpr double kDefaultWaveStateRange = 10.0;

/// A 1D rod governed by the heat or wave equation, fixed at x=0 and
/// actuated by a flux/force at x=L.
struct PdeSystem {
  PdeKind kind = PdeKind::Heat;
  double length = 100.0;
  double tmax = 5.0;
  double g0 = 300.0;
  InitialProfile u0 = InitialProfile::uniform(300.0);
  std::vector<Material> materials;
  double q_max = kDefaultHeatControlBound;
  std::optional<double> u_lo;
  std::optional<double> u_hi;

  double state_lo() const {
    return u_lo.value_or(g0 - (kind == PdeKind::Heat ? kDefaultHeatStateRange : kDefaultWaveStateRange));
  }
  double state_hi() const {
    return u_hi.value_or(g0 + (kind == PdeKind::Heat ? kDefaultHeatStateRange : kDefaultWaveStateRange));
  }

  /// Material governing the point x (segments are closed on the right).
  const Material& material_at(double x) const {
    for (const auto& m : materials)
      if (x <= m.x_end) return m;
    return materials.back();
  }

  void check() const {
    if (!(length > 0.0) || !std::isfinite(length)) throw ConfigError("rod length must be positive");
    if (!(tmax > 0.0) || !std::isfinite(tmax)) throw ConfigError("horizon must be positive");
    if (!std::isfinite(g0)) throw ConfigError("boundary value must be finite");
    if (!(q_max > 0.0)) throw ConfigError("control bound must be positive");
    if (!(state_lo() < state_hi())) throw ConfigError("state bounds are empty");
    if (materials.empty()) throw ConfigError("no materials");
    double prev = 0.0;
    for (const auto& m : materials) {
      if (!(m.x_end > prev)) throw ConfigError("material segment ends must increase");
      prev = m.x_end;
      const bool ok = kind == PdeKind::Heat ? (m.rho > 0 && m.c > 0 && m.kappa > 0) : (m.rho > 0 && m.E > 0);
      if (!ok) throw ConfigError("material constants must be positive");
    }
    if (std::fabs(prev - length) > 1e-9 * length) throw ConfigError("last material segment must end at L");
  }

  bool operator==(const PdeSystem&) const = default;
};

enum class MassMatrix { Consistent, Lumped };

struct Discretization {
  std::size_t nx = 20;
  std::size_t nt = 100;
  MassMatrix mass = MassMatrix::Consistent;

  double dx(const PdeSystem& sys) const { return sys.length / static_cast<double>(nx); }
  double dt(const PdeSystem& sys) const { return sys.tmax / static_cast<double>(nt); }

  void check() const {
    if (nx < 2) throw ConfigError("need at least 2 elements");
    if (nt < 1) throw ConfigError("need at least 1 time step");
  }
};

inline std::vector<double> node_coordinates(const PdeSystem& sys, const Discretization& disc) {
  std::vector<double> xs(disc.nx + 1);
  for (std::size_t i = 0; i <= disc.nx; ++i)
    xs[i] = sys.length * static_cast<double>(i) / static_cast<double>(disc.nx);
  xs.back() = sys.length;
  return xs;
}

inline std::vector<double> time_instants(const PdeSystem& sys, const Discretization& disc) {
  std::vector<double> ts(disc.nt + 1);
  for (std::size_t k = 0; k <= disc.nt; ++k)
    ts[k] = sys.tmax * static_cast<double>(k) / static_cast<double>(disc.nt);
  ts.back() = sys.tmax;
  return ts;
}

struct ValidityReport {
  bool valid = true;
  std::vector<std::string> issues;

  explicit operator bool() const { return valid; }
};

/// Checks every atom's window against [0, tmax] and its range against [0, L].
inline ValidityReport validate(const Formula& f, double length, double tmax) {
  ValidityReport report;
  const double t_tol = 1e-9 * std::max(1.0, tmax);
  const double x_tol = 1e-9 * std::max(1.0, length);
  auto flag = [&](const std::string& issue) {
    report.valid = false;
    report.issues.push_back(issue);
  };
  std::size_t idx = 0;
  for (const auto& a : f.atoms()) {
    const std::string where = "atom " + std::to_string(idx++) + ": ";
    if (!(a.t_lo <= a.t_hi) || !(a.pred.x_lo <= a.pred.x_hi)) flag(where + "inverted interval");
    if (!(a.t_lo >= -t_tol) || !(a.t_hi <= tmax + t_tol)) flag(where + "time window outside horizon");
    if (!(a.pred.x_lo >= -x_tol) || !(a.pred.x_hi <= length + x_tol)) flag(where + "space range outside rod");
    if (!std::isfinite(a.pred.a) || !std::isfinite(a.pred.b)) flag(where + "non-finite profile");
  }
  return report;
}

inline ValidityReport validate(const Formula& f, const PdeSystem& sys) {
  return validate(f, sys.length, sys.tmax);
}

}  // namespace stlpde

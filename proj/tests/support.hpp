#pragma once

// Test fixtures and independent oracles. Nothing here calls the library's
// evaluation code; the oracles restate the definitions directly.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "stlpde/stlpde.hpp"

namespace testing_support {

using namespace stlpde;

inline PdeSystem heat_rod(double length = 100.0, double tmax = 5.0) {
  PdeSystem sys;
  sys.kind = PdeKind::Heat;
  sys.length = length;
  sys.tmax = tmax;
  sys.g0 = 300.0;
  sys.u0 = InitialProfile::uniform(300.0);
  sys.materials = {{length / 2, 3e-6, 3e8, 1.8e6, 0.0}, {length, 3e-6, 4.5e8, 1.2e6, 0.0}};
  sys.q_max = 1e6;
  return sys;
}

inline PdeSystem wave_rod(double length = 100000.0, double tmax = 1.0) {
  PdeSystem sys;
  sys.kind = PdeKind::Wave;
  sys.length = length;
  sys.tmax = tmax;
  sys.g0 = 0.0;
  sys.u0 = InitialProfile::uniform(0.0);
  sys.materials = {{length / 2, 7.8e-6, 0.0, 0.0, 2.2e8}, {length, 8.6e-6, 0.0, 0.0, 1.4e8}};
  sys.q_max = 50.0;
  return sys;
}

inline TemporalAtom make_atom(TemporalOp op, double t_lo, double t_hi, double x_lo, double x_hi, Cmp cmp, double a,
                              double b) {
  return {op, t_lo, t_hi, {x_lo, x_hi, cmp, a, b}};
}

/// The rod example: a two-sided band over [30, 60] during [4, 5] and a cap at x = 100.
inline Formula rod_example() {
  const Formula upper = Formula::atom(make_atom(TemporalOp::G, 4, 5, 30, 60, Cmp::LT, 0.25, 303));
  const Formula lower = Formula::atom(make_atom(TemporalOp::G, 4, 5, 30, 60, Cmp::GT, 0.25, 297));
  const Formula cap = Formula::atom(make_atom(TemporalOp::G, 0, 5, 100, 100, Cmp::LT, 0, 345));
  return Formula::conj(Formula::conj(upper, lower), cap);
}

/// Random formula with 1..max_atoms atoms in one of the template shapes.
/// Windows and ranges sit on thirds of the grid spacing so no bound falls
/// exactly half-way between grid points, and every range holds a node.
inline Formula random_formula(Rng& rng, double length, double tmax, std::size_t nx, std::size_t nt,
                              std::size_t max_atoms, double u_mid, double u_spread) {
  const double dt = tmax / static_cast<double>(nt), h = length / static_cast<double>(nx);
  auto on_thirds = [&](std::size_t cells, bool need_node) {
    const std::size_t total = 3 * cells;
    const std::size_t lo = rng.index(total + 1);
    std::size_t hi = lo + rng.index(total - lo + 1);
    if (need_node && (lo + 2) / 3 * 3 > hi) hi = (lo + 2) / 3 * 3;
    return std::pair{static_cast<double>(lo) / 3.0, static_cast<double>(hi) / 3.0};
  };
  auto atom = [&] {
    TemporalAtom a;
    a.op = rng.index(2) ? TemporalOp::G : TemporalOp::F;
    const auto [t0, t1] = on_thirds(nt, false);
    const auto [x0, x1] = on_thirds(nx, true);
    a.t_lo = std::min(t0 * dt, tmax);
    a.t_hi = std::min(t1 * dt, tmax);
    a.pred.x_lo = std::min(x0 * h, length);
    a.pred.x_hi = std::min(x1 * h, length);
    a.pred.cmp = static_cast<Cmp>(rng.index(3));
    a.pred.a = rng.uniform(-1.0, 1.0) * u_spread / length;
    a.pred.b = u_mid + rng.uniform(-1.0, 1.0) * u_spread;
    return Formula::atom(a);
  };
  const std::size_t n = 1 + rng.index(max_atoms);
  if (n == 1) return atom();
  if (n == 2) return rng.index(2) ? Formula::conj(atom(), atom()) : Formula::disj(atom(), atom());
  static const Structure three[] = {Structure::OrOr, Structure::AndAnd, Structure::OrThenAnd,
                                    Structure::OrOfAnd, Structure::AndThenOr, Structure::AndOfOr};
  return build_formula(three[rng.index(6)], {atom(), atom(), atom()});
}

inline Trajectory random_trajectory(Rng& rng, double length, double tmax, std::size_t nx, std::size_t nt,
                                    double u_mid, double u_spread) {
  Trajectory t;
  for (std::size_t i = 0; i <= nx; ++i) t.xs.push_back(length * static_cast<double>(i) / static_cast<double>(nx));
  for (std::size_t k = 0; k <= nt; ++k) t.ts.push_back(tmax * static_cast<double>(k) / static_cast<double>(nt));
  for (std::size_t n = 0; n < (nx + 1) * (nt + 1); ++n) t.u.push_back(u_mid + rng.uniform(-1.0, 1.0) * u_spread);
  return t;
}

// ---------------------------------------------------------------------------
// Robustness by explicit enumeration of witness choices.

/// Grid indices j with lo <= j * step <= hi after widening both ends by
/// `pad` steps; when none qualifies, the index nearest the midpoint.
inline std::vector<std::size_t> oracle_indices(double lo, double hi, double step, std::size_t count, double pad) {
  const double eps = 1e-7;
  const double first = std::ceil(lo / step - pad - eps);
  const double last = std::floor(hi / step + pad + eps);
  std::vector<std::size_t> out;
  for (double j = std::max(0.0, first); j <= std::min(static_cast<double>(count - 1), last); j += 1.0)
    out.push_back(static_cast<std::size_t>(j));
  if (out.empty()) {
    const double mid = 0.5 * (lo + hi) / step;
    out.push_back(static_cast<std::size_t>(std::clamp(std::floor(mid + 0.5), 0.0, static_cast<double>(count - 1))));
  }
  return out;
}

struct Requirement {
  const TemporalAtom* atom;
  std::vector<std::size_t> steps;  // all must hold
};
using Strategy = std::vector<Requirement>;

inline std::vector<Strategy> strategies(const Formula& f, double dt, std::size_t n_steps) {
  if (f.is_atom()) {
    const TemporalAtom& a = f.as_atom();
    const auto steps = oracle_indices(a.t_lo, a.t_hi, dt, n_steps, 0.5);
    if (a.op == TemporalOp::G) return {{{&a, steps}}};
    std::vector<Strategy> out;
    for (std::size_t k : steps) out.push_back({{&a, {k}}});
    return out;
  }
  auto left = strategies(f.lhs(), dt, n_steps), right = strategies(f.rhs(), dt, n_steps);
  if (f.kind() == Formula::Kind::Or) {
    left.insert(left.end(), right.begin(), right.end());
    return left;
  }
  std::vector<Strategy> out;
  for (const auto& l : left)
    for (const auto& r : right) {
      Strategy s = l;
      s.insert(s.end(), r.begin(), r.end());
      out.push_back(s);
    }
  return out;
}

/// max over witness strategies of the min margin over every (step, node) it requires.
inline double oracle_robustness(const Formula& f, const Trajectory& traj) {
  const double dt = traj.ts[1] - traj.ts[0];
  const double h = traj.xs[1] - traj.xs[0];
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : strategies(f, dt, traj.ts.size())) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& req : s) {
      const auto& p = req.atom->pred;
      for (std::size_t k : req.steps)
        for (std::size_t i : oracle_indices(p.x_lo, p.x_hi, h, traj.xs.size(), 0.0)) {
          const double u = traj.u[k * traj.xs.size() + i];
          const double mu = p.a * traj.xs[i] + p.b;
          const double m = p.cmp == Cmp::GT ? u - mu : p.cmp == Cmp::LT ? mu - u : -std::fabs(u - mu);
          worst = std::min(worst, m);
        }
    }
    best = std::max(best, worst);
  }
  return best;
}

// ---------------------------------------------------------------------------
// Best robustness over a control grid with `levels` values per step.

inline double control_grid_best(const PdeSystem& sys, const Discretization& disc, const Formula& f,
                                std::size_t levels = 5) {
  std::vector<double> grid;
  for (std::size_t l = 0; l < levels; ++l)
    grid.push_back(-sys.q_max + 2.0 * sys.q_max * static_cast<double>(l) / static_cast<double>(levels - 1));
  std::vector<std::size_t> digit(disc.nt, 0);
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    ControlTrajectory c{{}, sys.q_max};
    for (std::size_t d : digit) c.values.push_back(grid[d]);
    best = std::max(best, oracle_robustness(f, simulate(sys, disc, c)));
    std::size_t pos = 0;
    while (pos < digit.size() && ++digit[pos] == levels) digit[pos++] = 0;
    if (pos == digit.size()) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Satisfying-box volumes by sampling.

inline bool inside_box(const TemporalAtom& a, const PdeSystem& sys, double x, double t, double u) {
  auto widened = [](double lo, double hi, double span) {
    if (hi > lo) return std::pair{lo, hi};
    double l = lo - 0.005 * span, r = hi + 0.005 * span;
    if (l < 0) r -= l, l = 0;
    if (r > span) l -= r - span, r = span;
    return std::pair{std::max(0.0, l), r};
  };
  const auto [x0, x1] = widened(a.pred.x_lo, a.pred.x_hi, sys.length);
  const auto [t0, t1] = widened(a.t_lo, a.t_hi, sys.tmax);
  if (x < x0 || x > x1 || t < t0 || t > t1) return false;
  const double mu = a.pred.a * x + a.pred.b;
  const double band = 0.005 * (sys.state_hi() - sys.state_lo());
  switch (a.pred.cmp) {
    case Cmp::GT: return u >= mu;
    case Cmp::LT: return u <= mu;
    case Cmp::EQ: return std::fabs(u - mu) <= band;
  }
  return false;
}

/// Midpoint-grid estimate with n cells per axis over [0,L]x[0,tmax]x[u_lo,u_hi].
inline double grid_iou(const TemporalAtom& p, const TemporalAtom& q, const PdeSystem& sys, std::size_t n) {
  std::size_t inter = 0, uni = 0;
  const double u_lo = sys.state_lo(), u_hi = sys.state_hi();
  for (std::size_t ix = 0; ix < n; ++ix) {
    const double x = sys.length * (static_cast<double>(ix) + 0.5) / static_cast<double>(n);
    for (std::size_t it = 0; it < n; ++it) {
      const double t = sys.tmax * (static_cast<double>(it) + 0.5) / static_cast<double>(n);
      for (std::size_t iu = 0; iu < n; ++iu) {
        const double u = u_lo + (u_hi - u_lo) * (static_cast<double>(iu) + 0.5) / static_cast<double>(n);
        const bool a = inside_box(p, sys, x, t, u), b = inside_box(q, sys, x, t, u);
        inter += a && b;
        uni += a || b;
      }
    }
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct McEstimate {
  double volume;
  double sigma;
};

/// Monte-Carlo volume of an atom's box over the full (x, t, u) domain.
inline McEstimate mc_volume(const TemporalAtom& a, const PdeSystem& sys, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const double u_lo = sys.state_lo(), u_hi = sys.state_hi();
  const double domain = sys.length * sys.tmax * (u_hi - u_lo);
  std::size_t hits = 0;
  for (std::size_t s = 0; s < n; ++s)
    hits += inside_box(a, sys, rng.uniform(0, sys.length), rng.uniform(0, sys.tmax), rng.uniform(u_lo, u_hi));
  const double p = static_cast<double>(hits) / static_cast<double>(n);
  return {p * domain, std::sqrt(p * (1 - p) / static_cast<double>(n)) * domain};
}

// ---------------------------------------------------------------------------
// Hyperparameter ranges for sampled systems, per kind.

struct Range {
  double lo, hi;
  bool holds(double v) const { return v >= lo && v <= hi; }
};

inline std::vector<std::string> out_of_range(const PdeSystem& s, const Formula& f) {
  std::vector<std::string> bad;
  auto check = [&](const char* what, double v, Range r) {
    if (!r.holds(v)) bad.push_back(std::string(what) + "=" + format_number(v));
  };
  if (s.materials.size() != 2) return {"material count"};
  const Material &a = s.materials[0], &b = s.materials[1];
  if (s.kind == PdeKind::Heat) {
    check("L", s.length, {50, 300});
    check("tmax", s.tmax, {5, 15});
    check("g0", s.g0, {250, 350});
    check("rho_a", a.rho, {3e-6, 6e-6});
    check("rho_b", b.rho, {3e-6, 6e-6});
    check("c_a", a.c, {3e8, 4.5e8});
    check("c_b", b.c, {4.5e8, 4.8e8});
    check("kappa_a", a.kappa, {1.2e6, 1.8e6});
    check("kappa_b", b.kappa, {0.4e6, 1.2e6});
  } else {
    check("L", s.length, {60000, 140000});
    check("tmax", s.tmax, {0.5, 2});
    check("rho_steel", a.rho, {7.6e-6, 8e-6});
    check("rho_brass", b.rho, {8.4e-6, 8.8e-6});
    check("E_steel", a.E, {2e8, 2.4e8});
    check("E_brass", b.E, {1e8, 1.8e8});
  }
  for (const auto& atom : f.atoms()) {
    check("t_lo", atom.t_lo, {0, s.tmax});
    check("t_hi", atom.t_hi, {atom.t_lo, s.tmax});
    check("x_lo", atom.pred.x_lo, {0, s.length});
    check("x_hi", atom.pred.x_hi, {atom.pred.x_lo, s.length});
    if (s.kind == PdeKind::Heat) {
      check("a", atom.pred.a, {-0.5, 0.5});
      check("b", atom.pred.b, {s.g0 - 20, s.g0 + 20});
    } else {
      check("a", atom.pred.a, {-5e-5, 5e-5});
      check("b", atom.pred.b, {-3, 3});
    }
  }
  return bad;
}

inline std::vector<std::string> out_of_range(const ProblemInstance& inst) { return out_of_range(inst.sys, inst.formula); }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace testing_support

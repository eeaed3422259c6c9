#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "stlpde/errors.hpp"
#include "stlpde/stl.hpp"
#include "stlpde/system.hpp"

namespace stlpde {

/// State field sampled on a space-time grid; row k holds u(ts[k], xs[:]).
struct Trajectory {
  std::vector<double> xs;
  std::vector<double> ts;
  std::vector<double> u;

  std::size_t steps() const { return ts.size(); }
  std::size_t nodes() const { return xs.size(); }
  double at(std::size_t k, std::size_t i) const { return u[k * xs.size() + i]; }
  double& at(std::size_t k, std::size_t i) { return u[k * xs.size() + i]; }

  std::span<const double> row(std::size_t k) const { return {u.data() + k * xs.size(), xs.size()}; }

  double length() const { return xs.back(); }
  double horizon() const { return ts.back(); }
};

/// Signed distance from satisfying `pred` at one point.
inline double margin(const LinearPredicate& pred, double x, double u_val) {
  const double mu = pred.profile(x);
  switch (pred.cmp) {
    case Cmp::GT: return u_val - mu;
    case Cmp::LT: return mu - u_val;
    case Cmp::EQ: return -std::fabs(u_val - mu);
  }
  return 0.0;
}

/// Time steps k with ts[k] in [t_lo - dt/2, t_hi + dt/2]. A window that
/// catches no step falls back to the step nearest its midpoint, provided the
/// midpoint lies on the grid's span.
inline std::vector<std::size_t> window_steps(std::span<const double> ts, double t_lo, double t_hi) {
  if (ts.empty()) throw EmptyWindow("trajectory has no time steps");
  const double half = ts.size() > 1 ? 0.5 * (ts.back() - ts.front()) / static_cast<double>(ts.size() - 1) : 0.0;
  const double tol = 1e-9 * std::max(half, 1e-12);
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < ts.size(); ++k)
    if (ts[k] >= t_lo - half - tol && ts[k] <= t_hi + half + tol) out.push_back(k);
  if (out.empty()) {
    const double mid = 0.5 * (t_lo + t_hi);
    if (mid < ts.front() - half || mid > ts.back() + half)
      throw EmptyWindow("window [" + std::to_string(t_lo) + ", " + std::to_string(t_hi) + "] misses the grid");
    std::size_t best = 0;
    for (std::size_t k = 1; k < ts.size(); ++k)
      if (std::fabs(ts[k] - mid) < std::fabs(ts[best] - mid)) best = k;
    out.push_back(best);
  }
  return out;
}

/// Nodes with x_lo <= xs[i] <= x_hi; a range between two nodes maps to the
/// node nearest its midpoint.
inline std::vector<std::size_t> range_nodes(std::span<const double> xs, double x_lo, double x_hi) {
  if (xs.empty()) throw EmptyWindow("trajectory has no nodes");
  const double h = xs.size() > 1 ? (xs.back() - xs.front()) / static_cast<double>(xs.size() - 1) : 1.0;
  const double tol = 1e-9 * h;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (xs[i] >= x_lo - tol && xs[i] <= x_hi + tol) out.push_back(i);
  if (out.empty()) {
    const double mid = 0.5 * (x_lo + x_hi);
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
      if (std::fabs(xs[i] - mid) < std::fabs(xs[best] - mid)) best = i;
    out.push_back(best);
  }
  return out;
}

namespace detail {

inline double atom_robustness(const TemporalAtom& a, const Trajectory& traj) {
  const auto steps = window_steps(traj.ts, a.t_lo, a.t_hi);
  const auto nodes = range_nodes(traj.xs, a.pred.x_lo, a.pred.x_hi);
  double acc = a.op == TemporalOp::G ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
  for (std::size_t k : steps) {
    double spatial = std::numeric_limits<double>::infinity();
    for (std::size_t i : nodes) spatial = std::min(spatial, margin(a.pred, traj.xs[i], traj.at(k, i)));
    acc = a.op == TemporalOp::G ? std::min(acc, spatial) : std::max(acc, spatial);
  }
  return acc;
}

inline double robustness_rec(const Formula& f, const Trajectory& traj) {
  switch (f.kind()) {
    case Formula::Kind::Atom: return atom_robustness(f.as_atom(), traj);
    case Formula::Kind::And: return std::min(robustness_rec(f.lhs(), traj), robustness_rec(f.rhs(), traj));
    case Formula::Kind::Or: return std::max(robustness_rec(f.lhs(), traj), robustness_rec(f.rhs(), traj));
  }
  return 0.0;
}

}  // namespace detail

/// Quantitative satisfaction of `f` by `traj`: min for conjunction and G,
/// max for disjunction and F, min over the nodes of each spatial range.
inline double eval_robustness(const Formula& f, const Trajectory& traj) {
  if (traj.xs.empty() || traj.ts.empty() || traj.u.size() != traj.xs.size() * traj.ts.size())
    throw DomainMismatch("malformed trajectory");
  const auto report = validate(f, traj.length(), traj.horizon());
  if (!report.valid) throw DomainMismatch(report.issues.front());
  return detail::robustness_rec(f, traj);
}

}  // namespace stlpde

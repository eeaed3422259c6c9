#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stlpde/errors.hpp"

namespace stlpde {

enum class Cmp { LT, GT, EQ };
enum class TemporalOp { G, F };

inline const char* cmp_symbol(Cmp cmp) {
  switch (cmp) {
    case Cmp::LT: return "<";
    case Cmp::GT: return ">";
    case Cmp::EQ: return "=";
  }
  return "?";
}

inline const char* op_symbol(TemporalOp op) { return op == TemporalOp::G ? "G" : "F"; }

/// u(x) <cmp> a*x + b for every x in [x_lo, x_hi].
struct LinearPredicate {
  double x_lo = 0.0;
  double x_hi = 0.0;
  Cmp cmp = Cmp::GT;
  double a = 0.0;
  double b = 0.0;

  double profile(double x) const { return a * x + b; }

  bool operator==(const LinearPredicate&) const = default;
};

struct TemporalAtom {
  TemporalOp op = TemporalOp::G;
  double t_lo = 0.0;
  double t_hi = 0.0;
  LinearPredicate pred;

  bool operator==(const TemporalAtom&) const = default;
};

/// Immutable binary tree of temporal atoms joined by conjunction and
/// disjunction. Copies share structure.
class Formula {
 public:
  enum class Kind { Atom, And, Or };

  static Formula atom(const TemporalAtom& a) {
    if (!(a.t_lo <= a.t_hi)) throw SemanticsError("inverted time window");
    if (!(a.pred.x_lo <= a.pred.x_hi)) throw SemanticsError("inverted space range");
    if (a.t_lo < 0.0) throw SemanticsError("negative time");
    if (!std::isfinite(a.t_hi) || !std::isfinite(a.pred.x_lo) || !std::isfinite(a.pred.x_hi) ||
        !std::isfinite(a.pred.a) || !std::isfinite(a.pred.b))
      throw SemanticsError("non-finite atom parameter");
    return Formula(std::make_shared<const Node>(Node{Kind::Atom, a, {}, {}}));
  }
  static Formula conj(Formula lhs, Formula rhs) {
    return Formula(std::make_shared<const Node>(
        Node{Kind::And, {}, std::move(lhs.node_), std::move(rhs.node_)}));
  }
  static Formula disj(Formula lhs, Formula rhs) {
    return Formula(std::make_shared<const Node>(
        Node{Kind::Or, {}, std::move(lhs.node_), std::move(rhs.node_)}));
  }

  Kind kind() const { return node_->kind; }
  bool is_atom() const { return node_->kind == Kind::Atom; }
  const TemporalAtom& as_atom() const {
    assert(is_atom());
    return node_->atom;
  }
  Formula lhs() const { return Formula(node_->lhs); }
  Formula rhs() const { return Formula(node_->rhs); }

  /// Atoms in left-to-right order.
  std::vector<TemporalAtom> atoms() const {
    std::vector<TemporalAtom> out;
    collect(*node_, out);
    return out;
  }

  std::size_t atom_count() const { return count(*node_, true); }

  /// Number of nodes; pre-order indices run over [0, node_count()).
  std::size_t node_count() const { return count(*node_, false); }

  /// Same tree shape with every atom replaced by `fn(atom)`.
  Formula map_atoms(const std::function<TemporalAtom(const TemporalAtom&)>& fn) const {
    switch (kind()) {
      case Kind::Atom: return atom(fn(as_atom()));
      case Kind::And: return conj(lhs().map_atoms(fn), rhs().map_atoms(fn));
      case Kind::Or: return disj(lhs().map_atoms(fn), rhs().map_atoms(fn));
    }
    return *this;
  }

  friend bool operator==(const Formula& x, const Formula& y) { return equal(*x.node_, *y.node_); }

 private:
  struct Node {
    Kind kind;
    TemporalAtom atom;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
  };

  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  static void collect(const Node& n, std::vector<TemporalAtom>& out) {
    if (n.kind == Kind::Atom) {
      out.push_back(n.atom);
      return;
    }
    collect(*n.lhs, out);
    collect(*n.rhs, out);
  }

  static std::size_t count(const Node& n, bool atoms_only) {
    if (n.kind == Kind::Atom) return 1;
    return count(*n.lhs, atoms_only) + count(*n.rhs, atoms_only) + (atoms_only ? 0 : 1);
  }

  static bool equal(const Node& x, const Node& y) {
    if (&x == &y) return true;
    if (x.kind != y.kind) return false;
    if (x.kind == Kind::Atom) return x.atom == y.atom;
    return equal(*x.lhs, *y.lhs) && equal(*x.rhs, *y.rhs);
  }

  std::shared_ptr<const Node> node_;
};

/// Same shape, connectives and temporal operators (numbers and comparisons
/// may differ).
inline bool same_structure(const Formula& x, const Formula& y) {
  if (x.kind() != y.kind()) return false;
  if (x.is_atom()) return x.as_atom().op == y.as_atom().op;
  return same_structure(x.lhs(), y.lhs()) && same_structure(x.rhs(), y.rhs());
}

/// Moves every window by `offset` seconds, clamping at zero.
inline Formula shift_time(const Formula& f, double offset) {
  return f.map_atoms([offset](const TemporalAtom& a) {
    TemporalAtom out = a;
    out.t_lo = std::max(0.0, a.t_lo + offset);
    out.t_hi = std::max(out.t_lo, a.t_hi + offset);
    return out;
  });
}

inline double earliest_start(const Formula& f) {
  double t = f.atoms().front().t_lo;
  for (const auto& a : f.atoms()) t = std::min(t, a.t_lo);
  return t;
}

inline double latest_end(const Formula& f) {
  double t = f.atoms().front().t_hi;
  for (const auto& a : f.atoms()) t = std::max(t, a.t_hi);
  return t;
}

}  // namespace stlpde

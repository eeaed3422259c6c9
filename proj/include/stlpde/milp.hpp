#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stlpde/errors.hpp"
#include "stlpde/fem.hpp"
#include "stlpde/lp.hpp"
#include "stlpde/semantics.hpp"
#include "stlpde/stl.hpp"
#include "stlpde/system.hpp"
#include "stlpde/util.hpp"

namespace stlpde {

struct MilpVariable {
  std::string name;
  double lo = 0.0;
  double hi = 0.0;
  bool binary = false;
};

enum class RowRole { Dynamics, Epigraph, Selection, OneHot };

inline constexpr std::size_t kNoVar = static_cast<std::size_t>(-1);

struct MilpRow {
  std::string name;
  std::vector<std::pair<std::size_t, double>> terms;
  lp::Sense sense = lp::Sense::LessEqual;
  double rhs = 0.0;
  RowRole role = RowRole::Epigraph;
  std::size_t head = kNoVar;  // robustness variable bounded from above by this row
};

/// Selection binaries of one F-atom (one per window step) or Or node (one per child).
struct ChoiceGroup {
  std::size_t node = 0;
  std::vector<std::size_t> binaries;
};

struct MilpModel {
  std::vector<MilpVariable> vars;
  std::vector<MilpRow> rows;
  std::vector<std::pair<std::size_t, double>> objective;
  std::vector<ChoiceGroup> groups;
  std::size_t root = kNoVar;

  // Problem the model was encoded from; empty when read back from an LP file.
  std::optional<PdeSystem> sys;
  Discretization disc;
  std::optional<Formula> formula;
  std::vector<double> u_init;
  std::vector<std::size_t> q_vars;
  std::vector<std::size_t> u_vars;  // (nt+1)*(nx+1), row-major by step
  std::vector<std::size_t> v_vars;  // wave only

  std::size_t add_var(std::string name, double lo, double hi, bool binary = false) {
    vars.push_back({std::move(name), lo, hi, binary});
    return vars.size() - 1;
  }

  std::size_t num_binaries() const {
    return static_cast<std::size_t>(std::count_if(vars.begin(), vars.end(), [](const auto& v) { return v.binary; }));
  }

  std::optional<std::size_t> find(const std::string& name) const {
    for (std::size_t j = 0; j < vars.size(); ++j)
      if (vars[j].name == name) return j;
    return std::nullopt;
  }

  /// Number of one-hot assignments over all choice groups, saturating.
  double combinations() const {
    double n = 1.0;
    for (const auto& g : groups) n *= static_cast<double>(g.binaries.size());
    return n;
  }
};

namespace detail {

/// Largest |margin| any state in [u_lo, u_hi] can produce on the atom's nodes.
inline double atom_big_m(const TemporalAtom& a, std::span<const double> xs, std::span<const std::size_t> nodes,
                         double u_lo, double u_hi, double length) {
  double box = 0.0;
  for (std::size_t i : nodes) {
    const double mu = a.pred.profile(xs[i]);
    box = std::max({box, std::fabs(u_hi - mu), std::fabs(u_lo - mu)});
  }
  const double nominal = (u_hi - u_lo) + std::fabs(a.pred.a) * length + 1.0;
  return std::max(nominal, box + 1.0);
}

class Encoder {
 public:
  Encoder(MilpModel& m, const Trajectory& grid, double u_lo, double u_hi, double length)
      : m_(m), grid_(grid), u_lo_(u_lo), u_hi_(u_hi), length_(length) {}

  /// Encodes the subtree and returns its robustness variable with its bounds.
  std::size_t encode(const Formula& f) {
    const std::size_t n = next_node_++;
    if (f.is_atom()) return encode_atom(f.as_atom(), n);

    const std::string rn = "r_" + std::to_string(n);
    const std::size_t r = m_.add_var(rn, 0.0, 0.0);
    const std::size_t l = encode(f.lhs());
    const std::size_t rr = encode(f.rhs());
    m_.vars[r].lo = std::min(m_.vars[l].lo, m_.vars[rr].lo);
    m_.vars[r].hi = std::max(m_.vars[l].hi, m_.vars[rr].hi);

    if (f.kind() == Formula::Kind::And) {
      upper_bound_by(r, l, "epi_" + std::to_string(n) + "_0");
      upper_bound_by(r, rr, "epi_" + std::to_string(n) + "_1");
      return r;
    }
    ChoiceGroup g{n, {}};
    const std::size_t children[2] = {l, rr};
    for (std::size_t c = 0; c < 2; ++c) {
      const std::string suffix = std::to_string(n) + "_" + std::to_string(c);
      const std::size_t z = m_.add_var("z_" + suffix, 0.0, 1.0, true);
      g.binaries.push_back(z);
      select(r, children[c], z, "sel_" + suffix);
    }
    one_hot(g, "one_" + std::to_string(n));
    m_.groups.push_back(std::move(g));
    return r;
  }

 private:
  std::size_t encode_atom(const TemporalAtom& a, std::size_t n) {
    const auto steps = window_steps(grid_.ts, a.t_lo, a.t_hi);
    const auto nodes = range_nodes(grid_.xs, a.pred.x_lo, a.pred.x_hi);
    const double big = atom_big_m(a, grid_.xs, nodes, u_lo_, u_hi_, length_);
    const std::string rn = "r_" + std::to_string(n);
    const std::size_t r = m_.add_var(rn, -big, big);

    if (a.op == TemporalOp::G) {
      for (std::size_t k : steps) margin_rows(r, a.pred, k, nodes, "epi_" + std::to_string(n) + "_" + std::to_string(k));
      return r;
    }
    ChoiceGroup g{n, {}};
    for (std::size_t k : steps) {
      const std::string suffix = std::to_string(n) + "_" + std::to_string(k);
      const std::size_t cand = m_.add_var("r_" + suffix, -big, big);
      margin_rows(cand, a.pred, k, nodes, "epi_" + suffix);
      const std::size_t z = m_.add_var("z_" + suffix, 0.0, 1.0, true);
      g.binaries.push_back(z);
      select(r, cand, z, "sel_" + suffix);
    }
    one_hot(g, "one_" + std::to_string(n));
    m_.groups.push_back(std::move(g));
    return r;
  }

  // r <= margin at every node of step k
  void margin_rows(std::size_t r, const LinearPredicate& p, std::size_t k, std::span<const std::size_t> nodes,
                   const std::string& prefix) {
    const std::size_t nx1 = grid_.nodes();
    for (std::size_t i : nodes) {
      const double mu = p.profile(grid_.xs[i]);
      const std::size_t u = m_.u_vars[k * nx1 + i];
      const std::string base = prefix + "_" + std::to_string(i);
      if (p.cmp == Cmp::GT || p.cmp == Cmp::EQ)
        add_row(p.cmp == Cmp::EQ ? base + "_hi" : base, {{r, 1.0}, {u, -1.0}}, -mu, r);
      if (p.cmp == Cmp::LT || p.cmp == Cmp::EQ)
        add_row(p.cmp == Cmp::EQ ? base + "_lo" : base, {{r, 1.0}, {u, 1.0}}, mu, r);
    }
  }

  void upper_bound_by(std::size_t r, std::size_t child, const std::string& name) {
    add_row(name, {{r, 1.0}, {child, -1.0}}, 0.0, r);
  }

  // r - child + M z <= M
  void select(std::size_t r, std::size_t child, std::size_t z, const std::string& name) {
    const double big = m_.vars[r].hi - m_.vars[child].lo;
    MilpRow row{name, {{r, 1.0}, {child, -1.0}, {z, big}}, lp::Sense::LessEqual, big, RowRole::Selection, r};
    m_.rows.push_back(std::move(row));
  }

  void one_hot(const ChoiceGroup& g, const std::string& name) {
    MilpRow row{name, {}, lp::Sense::Equal, 1.0, RowRole::OneHot, kNoVar};
    for (std::size_t z : g.binaries) row.terms.push_back({z, 1.0});
    m_.rows.push_back(std::move(row));
  }

  void add_row(std::string name, std::vector<std::pair<std::size_t, double>> terms, double rhs, std::size_t head) {
    m_.rows.push_back({std::move(name), std::move(terms), lp::Sense::LessEqual, rhs, RowRole::Epigraph, head});
  }

  MilpModel& m_;
  const Trajectory& grid_;
  double u_lo_, u_hi_, length_;
  std::size_t next_node_ = 0;
};

}  // namespace detail

/// Builds "maximize r(f) subject to the implicit-Euler dynamics" starting
/// from u_init. Node indices follow a pre-order walk of the formula.
inline MilpModel encode(const PdeSystem& sys, const Discretization& disc, const Formula& f,
                        std::span<const double> u_init) {
  sys.check();
  disc.check();
  const auto report = validate(f, sys);
  if (!report.valid) throw DomainMismatch(report.issues.front());
  const std::size_t nx1 = disc.nx + 1;
  if (u_init.size() != nx1) throw ConfigError("initial profile must have nx+1 values");

  MilpModel m;
  m.sys = sys;
  m.disc = disc;
  m.formula = f;
  m.u_init.assign(u_init.begin(), u_init.end());
  m.u_init[0] = sys.g0;

  const double dt = disc.dt(sys);
  const double u_lo = sys.state_lo(), u_hi = sys.state_hi();
  const Assembly asmb = assemble(sys, disc);
  const Tridiagonal a = step_matrix(sys, asmb, dt);
  const bool wave = sys.kind == PdeKind::Wave;

  for (std::size_t k = 0; k < disc.nt; ++k) m.q_vars.push_back(m.add_var("q_" + std::to_string(k), -sys.q_max, sys.q_max));
  for (std::size_t k = 0; k <= disc.nt; ++k) {
    for (std::size_t i = 0; i < nx1; ++i) {
      double lo = u_lo, hi = u_hi;
      if (k == 0) lo = hi = m.u_init[i];
      else if (i == 0) lo = hi = sys.g0;
      m.u_vars.push_back(m.add_var("u_" + std::to_string(k) + "_" + std::to_string(i), lo, hi));
    }
  }
  if (wave) {
    const double vmax = (u_hi - u_lo) / dt;
    for (std::size_t k = 0; k <= disc.nt; ++k)
      for (std::size_t i = 0; i < nx1; ++i) {
        const bool fixed = k == 0 || i == 0;
        m.v_vars.push_back(
            m.add_var("v_" + std::to_string(k) + "_" + std::to_string(i), fixed ? 0.0 : -vmax, fixed ? 0.0 : vmax));
      }
  }

  auto tri_terms = [&](const Tridiagonal& t, std::size_t i, const std::vector<std::size_t>& vars, std::size_t k,
                       double scale, std::vector<std::pair<std::size_t, double>>& out) {
    for (std::size_t j = i == 0 ? 0 : i - 1; j <= std::min(i + 1, disc.nx); ++j) {
      const double c = t.at(i, j);
      if (c != 0.0) out.push_back({vars[k * nx1 + j], scale * c});
    }
  };

  for (std::size_t k = 0; k < disc.nt; ++k) {
    for (std::size_t i = 1; i < nx1; ++i) {
      const std::string suffix = std::to_string(k) + "_" + std::to_string(i);
      MilpRow row{"dyn_" + suffix, {}, lp::Sense::Equal, 0.0, RowRole::Dynamics, kNoVar};
      if (!wave) {
        // (M + dt K) u^{k+1} - M u^k - dt q^k e_L = 0
        tri_terms(a, i, m.u_vars, k + 1, 1.0, row.terms);
        tri_terms(asmb.mass, i, m.u_vars, k, -1.0, row.terms);
      } else {
        // (M + dt^2 K) v^{k+1} - M v^k + dt K u^k - dt q^k e_L = 0
        tri_terms(a, i, m.v_vars, k + 1, 1.0, row.terms);
        tri_terms(asmb.mass, i, m.v_vars, k, -1.0, row.terms);
        tri_terms(asmb.stiffness, i, m.u_vars, k, dt, row.terms);
      }
      if (i == asmb.load_node) row.terms.push_back({m.q_vars[k], -dt});
      m.rows.push_back(std::move(row));
      if (wave) {
        // u^{k+1} - u^k - dt v^{k+1} = 0
        m.rows.push_back({"pos_" + suffix,
                          {{m.u_vars[(k + 1) * nx1 + i], 1.0}, {m.u_vars[k * nx1 + i], -1.0}, {m.v_vars[(k + 1) * nx1 + i], -dt}},
                          lp::Sense::Equal,
                          0.0,
                          RowRole::Dynamics,
                          kNoVar});
      }
    }
  }

  Trajectory grid{node_coordinates(sys, disc), time_instants(sys, disc), {}};
  detail::Encoder enc(m, grid, u_lo, u_hi, sys.length);
  m.root = enc.encode(f);
  m.objective = {{m.root, 1.0}};
  return m;
}

inline MilpModel encode(const PdeSystem& sys, const Discretization& disc, const Formula& f) {
  const auto u_init = sys.u0.on_nodes(disc.nx);
  return encode(sys, disc, f, u_init);
}

namespace detail {

inline std::string lp_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_terms(std::ostringstream& os, const std::vector<std::pair<std::size_t, double>>& terms,
                        const std::vector<MilpVariable>& vars) {
  bool first = true;
  for (const auto& [j, c] : terms) {
    if (first) {
      if (c < 0) os << "- ";
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    const double mag = std::fabs(c);
    if (mag != 1.0) os << lp_number(mag) << ' ';
    os << vars[j].name;
    first = false;
  }
  if (first) os << "0 " << vars.front().name;
}

}  // namespace detail

/// CPLEX-LP text of the model.
inline std::string write_lp(const MilpModel& m) {
  std::ostringstream os;
  os << "Maximize\n obj: ";
  detail::write_terms(os, m.objective, m.vars);
  os << "\nSubject To\n";
  for (const auto& row : m.rows) {
    os << ' ' << row.name << ": ";
    detail::write_terms(os, row.terms, m.vars);
    switch (row.sense) {
      case lp::Sense::LessEqual: os << " <= "; break;
      case lp::Sense::GreaterEqual: os << " >= "; break;
      case lp::Sense::Equal: os << " = "; break;
    }
    os << detail::lp_number(row.rhs) << '\n';
  }
  os << "Bounds\n";
  for (const auto& v : m.vars) {
    if (v.binary) continue;
    if (v.lo == v.hi) os << ' ' << v.name << " = " << detail::lp_number(v.lo) << '\n';
    else os << ' ' << detail::lp_number(v.lo) << " <= " << v.name << " <= " << detail::lp_number(v.hi) << '\n';
  }
  if (m.num_binaries() > 0) {
    os << "Binaries\n";
    for (const auto& v : m.vars)
      if (v.binary) os << ' ' << v.name << '\n';
  }
  os << "End\n";
  return os.str();
}

namespace detail {

inline std::vector<std::string> lp_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '\\') {
      while (i < text.size() && text[i] != '\n') ++i;
      flush();
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '<' || c == '>' || c == '=') {
      flush();
      std::string op(1, c);
      if (i + 1 < text.size() && text[i + 1] == '=') op += '=', ++i;
      if (op == "=" && i + 1 < text.size() && (text[i + 1] == '<' || text[i + 1] == '>')) op = std::string(1, text[++i]) + "=";
      out.push_back(op);
    } else if ((c == '+' || c == '-') && cur.empty()) {
      out.push_back(std::string(1, c));
    } else if ((c == '+' || c == '-') && !cur.empty() && (cur.back() == 'e' || cur.back() == 'E') &&
               std::isdigit(static_cast<unsigned char>(cur.front()))) {
      cur += c;
    } else if (c == '+' || c == '-') {
      flush();
      out.push_back(std::string(1, c));
    } else if (c == ':') {
      cur += c;
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return out;
}

inline bool lp_is_number(const std::string& tok, double& v) {
  if (tok == "inf" || tok == "infinity" || tok == "Inf" || tok == "Infinity") {
    v = lp::kInf;
    return true;
  }
  return parse_double(tok, v);
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace detail

/// Parses the LP dialect written by write_lp back into a model without
/// problem context. Variables appear in the order Bounds then Binaries, then
/// any name seen only in constraints.
inline MilpModel read_lp(const std::string& text) {
  using detail::lower;
  const auto toks = detail::lp_tokens(text);
  MilpModel m;
  std::map<std::string, std::size_t> index;
  std::vector<std::size_t> bound_order, binary_order;
  auto var = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    const std::size_t j = m.add_var(name, 0.0, lp::kInf);
    index.emplace(name, j);
    return j;
  };

  enum class Section { None, Objective, Constraints, Bounds, Binaries, Done } sec = Section::None;
  std::size_t p = 0;
  auto section_of = [&](const std::string& t) -> std::optional<Section> {
    const std::string l = lower(t);
    if (l == "maximize" || l == "maximise" || l == "max") return Section::Objective;
    if (l == "subject" || l == "st" || l == "s.t.") return Section::Constraints;
    if (l == "bounds") return Section::Bounds;
    if (l == "binaries" || l == "binary") return Section::Binaries;
    if (l == "end") return Section::Done;
    return std::nullopt;
  };

  // Linear expression until a relational operator or a section keyword.
  auto read_expr = [&](std::vector<std::pair<std::size_t, double>>& terms) {
    double sign = 1.0;
    double coef = 1.0;
    bool has_coef = false;
    while (p < toks.size()) {
      const std::string& t = toks[p];
      if (t == "<=" || t == ">=" || t == "=" || t == "<" || t == ">") break;
      if (section_of(t) || (t.back() == ':' && !has_coef)) {
        if (sign != 1.0 || has_coef) throw SyntaxError("dangling term before '" + t + "'");
        break;
      }
      if (t == "+") {
        ++p;
        continue;
      }
      if (t == "-") {
        sign = -sign;
        ++p;
        continue;
      }
      double v;
      if (detail::lp_is_number(t, v)) {
        coef *= v;
        has_coef = true;
        ++p;
        continue;
      }
      if (lower(t) == "to" && sec == Section::Constraints) break;
      terms.push_back({var(t), sign * coef});
      sign = 1.0;
      coef = 1.0;
      has_coef = false;
      ++p;
    }
  };

  while (p < toks.size() && sec != Section::Done) {
    if (auto s = section_of(toks[p])) {
      sec = *s;
      ++p;
      if (sec == Section::Constraints && p < toks.size() && lower(toks[p]) == "to") ++p;
      continue;
    }
    switch (sec) {
      case Section::None: throw SyntaxError("LP text must start with an objective section");
      case Section::Objective: {
        if (toks[p].back() == ':') ++p;
        read_expr(m.objective);
        break;
      }
      case Section::Constraints: {
        MilpRow row;
        if (toks[p].back() == ':') {
          row.name = toks[p].substr(0, toks[p].size() - 1);
          ++p;
        } else {
          row.name = "c" + std::to_string(m.rows.size());
        }
        read_expr(row.terms);
        if (p >= toks.size()) throw SyntaxError("constraint '" + row.name + "' has no relation");
        const std::string op = toks[p++];
        row.sense = op[0] == '<' ? lp::Sense::LessEqual : op[0] == '>' ? lp::Sense::GreaterEqual : lp::Sense::Equal;
        double sign = 1.0;
        while (p < toks.size() && (toks[p] == "-" || toks[p] == "+")) sign *= toks[p++] == "-" ? -1.0 : 1.0;
        double v;
        if (p >= toks.size() || !detail::lp_is_number(toks[p], v)) throw SyntaxError("constraint '" + row.name + "' needs a numeric right-hand side");
        row.rhs = sign * v;
        ++p;
        m.rows.push_back(std::move(row));
        break;
      }
      case Section::Bounds: {
        // forms: name = v | lo <= name <= hi | name >= lo | name <= hi | name free
        auto number = [&](double& v) {
          double sign = 1.0;
          std::size_t q = p;
          while (q < toks.size() && (toks[q] == "-" || toks[q] == "+")) sign *= toks[q++] == "-" ? -1.0 : 1.0;
          if (q < toks.size() && detail::lp_is_number(toks[q], v)) {
            v *= sign;
            p = q + 1;
            return true;
          }
          return false;
        };
        double lo;
        if (number(lo)) {
          if (p >= toks.size() || toks[p][0] != '<') throw SyntaxError("malformed bound");
          ++p;
          const std::size_t j = var(toks[p++]);
          bound_order.push_back(j);
          m.vars[j].lo = lo;
          if (p < toks.size() && toks[p][0] == '<') {
            ++p;
            double hi;
            if (!number(hi)) throw SyntaxError("malformed bound");
            m.vars[j].hi = hi;
          }
          break;
        }
        const std::size_t j = var(toks[p++]);
        bound_order.push_back(j);
        if (p < toks.size() && lower(toks[p]) == "free") {
          m.vars[j].lo = -lp::kInf;
          m.vars[j].hi = lp::kInf;
          ++p;
          break;
        }
        if (p >= toks.size()) throw SyntaxError("malformed bound");
        const std::string op = toks[p++];
        double v;
        if (!number(v)) throw SyntaxError("malformed bound");
        if (op == "=") m.vars[j].lo = m.vars[j].hi = v;
        else if (op[0] == '<') m.vars[j].hi = v;
        else m.vars[j].lo = v;
        break;
      }
      case Section::Binaries: {
        const std::size_t j = var(toks[p++]);
        binary_order.push_back(j);
        m.vars[j].binary = true;
        m.vars[j].lo = 0.0;
        m.vars[j].hi = 1.0;
        break;
      }
      case Section::Done: break;
    }
  }
  if (sec != Section::Done) throw SyntaxError("LP text has no End");

  // Reorder: bounded variables in Bounds order, then the rest, binaries in Binaries order.
  std::vector<std::size_t> order = bound_order;
  std::vector<bool> placed(m.vars.size(), false);
  for (std::size_t j : order) placed[j] = true;
  for (std::size_t j = 0; j < m.vars.size(); ++j)
    if (!placed[j] && !m.vars[j].binary) order.push_back(j), placed[j] = true;
  for (std::size_t j : binary_order)
    if (!placed[j]) order.push_back(j), placed[j] = true;
  std::vector<std::size_t> new_index(m.vars.size());
  MilpModel out;
  for (std::size_t j : order) {
    new_index[j] = out.vars.size();
    out.vars.push_back(m.vars[j]);
  }
  auto remap = [&](std::vector<std::pair<std::size_t, double>>& terms) {
    for (auto& t : terms) t.first = new_index[t.first];
  };
  out.objective = std::move(m.objective);
  remap(out.objective);
  out.rows = std::move(m.rows);
  for (auto& row : out.rows) remap(row.terms);
  if (out.objective.size() == 1) out.root = out.objective.front().first;
  return out;
}

}  // namespace stlpde

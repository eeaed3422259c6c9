#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "stlpde/errors.hpp"
#include "stlpde/fem.hpp"
#include "stlpde/lp.hpp"
#include "stlpde/milp.hpp"
#include "stlpde/semantics.hpp"

namespace stlpde {

enum class SolveStatus { Optimal, Feasible, Infeasible, TimedOut, SolverFailed };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::TimedOut: return "timed_out";
    case SolveStatus::SolverFailed: return "solver_failed";
  }
  return "?";
}

struct SolveOutcome {
  SolveStatus status = SolveStatus::SolverFailed;
  double objective = 0.0;
  std::optional<double> gap;
  ControlTrajectory control;
  Trajectory trajectory;
  double robustness = 0.0;  // eval_robustness of the re-simulated control
  bool has_solution = false;
  std::size_t lps_solved = 0;
  std::size_t pivots = 0;
  std::string message;
};

inline bool consistent(double objective, double robustness) {
  return std::fabs(objective - robustness) <= 1e-6 * std::max(1.0, std::fabs(objective));
}

namespace detail {

inline void require_context(const MilpModel& m) {
  if (!m.sys || !m.formula || m.q_vars.empty())
    throw ConfigError("model carries no problem context (was it read from an LP file?)");
}

/// Clamps the control, re-simulates it and fills the outcome's trajectory and robustness.
inline void attach_solution(const MilpModel& m, std::vector<double> q, SolveOutcome& out) {
  for (double& v : q) v = std::clamp(v, -m.sys->q_max, m.sys->q_max);
  out.control = ControlTrajectory{std::move(q), m.sys->q_max};
  out.trajectory = simulate(*m.sys, m.disc, out.control, m.u_init);
  out.robustness = eval_robustness(*m.formula, out.trajectory);
  out.has_solution = true;
}

/// Every state as an affine function of the control: u[k][i] = free[k][i] +
/// sum_{j<k} impulse[k-j][i] q_j, using time invariance of the stepping.
struct AffineStates {
  std::size_t nx1 = 0;
  std::vector<double> free;
  std::vector<double> impulse;

  AffineStates(const MilpModel& m) {
    const auto& sys = *m.sys;
    nx1 = m.disc.nx + 1;
    ControlTrajectory zero{std::vector<double>(m.disc.nt, 0.0), sys.q_max};
    free = simulate(sys, m.disc, zero, m.u_init).u;

    PdeSystem homog = sys;
    homog.g0 = 0.0;
    ControlTrajectory unit = zero;
    unit.values[0] = 1.0;
    impulse = simulate(homog, m.disc, unit, std::vector<double>(nx1, 0.0)).u;
  }

  double coef(std::size_t k, std::size_t i, std::size_t j) const {
    return j < k ? impulse[(k - j) * nx1 + i] : 0.0;
  }
};

struct Assignment {
  std::vector<std::size_t> choice;  // per group
};

inline std::vector<double> binary_values(const MilpModel& m, const Assignment& a) {
  std::vector<double> z(m.vars.size(), 0.0);
  for (std::size_t g = 0; g < m.groups.size(); ++g) z[m.groups[g].binaries[a.choice[g]]] = 1.0;
  return z;
}

inline bool next_assignment(const MilpModel& m, Assignment& a) {
  for (std::size_t g = m.groups.size(); g-- > 0;) {
    if (++a.choice[g] < m.groups[g].binaries.size()) return true;
    a.choice[g] = 0;
  }
  return false;
}

/// Reduced LP for one fixed assignment over (q, live robustness variables),
/// with states substituted out. State bounds are added lazily.
class CondensedLp {
 public:
  CondensedLp(const MilpModel& m, const AffineStates& aff, const Assignment& a) : m_(m), aff_(aff) {
    const auto z = binary_values(m, a);
    role_.assign(m.vars.size(), Kind::Robust);
    for (std::size_t j : m.q_vars) role_[j] = Kind::Control;
    for (std::size_t j : m.u_vars) role_[j] = Kind::State;
    for (std::size_t j : m.v_vars) role_[j] = Kind::State;
    for (std::size_t j = 0; j < m.vars.size(); ++j)
      if (m.vars[j].binary) role_[j] = Kind::Binary;
    state_index_.assign(m.vars.size(), kNoVar);
    for (std::size_t s = 0; s < m.u_vars.size(); ++s) state_index_[m.u_vars[s]] = s;

    // Rows that still bind once the binaries are fixed.
    std::vector<const MilpRow*> live;
    for (const auto& row : m.rows) {
      if (row.role == RowRole::Dynamics || row.role == RowRole::OneHot) continue;
      if (row.role == RowRole::Selection) {
        double zsum = 0.0;
        for (const auto& [j, c] : row.terms)
          if (role_[j] == Kind::Binary) zsum += c * z[j];
        if (zsum == 0.0) continue;  // redundant by choice of M
      }
      live.push_back(&row);
    }

    // Keep only rows reachable from the root through live rows.
    std::vector<bool> reach(m.vars.size(), false);
    reach[m.root] = true;
    std::vector<std::size_t> stack{m.root};
    std::multimap<std::size_t, const MilpRow*> by_head;
    for (const MilpRow* r : live) by_head.emplace(r->head, r);
    std::vector<const MilpRow*> kept;
    while (!stack.empty()) {
      const std::size_t h = stack.back();
      stack.pop_back();
      auto [b, e] = by_head.equal_range(h);
      for (auto it = b; it != e; ++it) {
        kept.push_back(it->second);
        for (const auto& [j, c] : it->second->terms)
          if (role_[j] == Kind::Robust && !reach[j]) {
            reach[j] = true;
            stack.push_back(j);
          }
      }
    }
    std::sort(kept.begin(), kept.end());

    col_of_.assign(m.vars.size(), kNoVar);
    for (std::size_t j : m.q_vars) add_column(j);
    for (std::size_t j = 0; j < m.vars.size(); ++j)
      if (reach[j]) add_column(j);
    prob_.objective.assign(prob_.lower.size(), 0.0);
    for (const auto& [j, c] : m.objective) prob_.objective[col_of_[j]] += c;

    for (const MilpRow* r : kept) {
      std::vector<double> dense(prob_.lower.size(), 0.0);
      double rhs = r->rhs;
      for (const auto& [j, c] : r->terms) {
        switch (role_[j]) {
          case Kind::Binary: rhs -= c * z[j]; break;
          case Kind::Control:
          case Kind::Robust: dense[col_of_[j]] += c; break;
          case Kind::State: rhs -= c * substitute(j, dense, c); break;
        }
      }
      push_row(dense, r->sense, rhs);
    }
  }

  /// Solves, adding violated state-bound rows until the states fit.
  lp::Solution solve(std::size_t& lps) {
    const double lo = m_.sys->state_lo(), hi = m_.sys->state_hi();
    const double tol = 1e-9 * std::max({1.0, std::fabs(lo), std::fabs(hi)});
    std::vector<bool> bounded(m_.u_vars.size(), false);
    std::size_t pivots = 0;
    for (;;) {
      lp::Solution sol = lp::solve(prob_);
      ++lps;
      pivots += sol.pivots;
      sol.pivots = pivots;
      if (sol.status != lp::Status::Optimal) return sol;
      bool added = false;
      const std::size_t nx1 = aff_.nx1;
      for (std::size_t s = nx1; s < m_.u_vars.size(); ++s) {
        if (s % nx1 == 0 || bounded[s]) continue;
        const double u = state_value(s, sol.x);
        if (u < lo - tol || u > hi + tol) {
          bounded[s] = true;
          added = true;
          std::vector<double> dense(prob_.lower.size(), 0.0);
          const double c = substitute(m_.u_vars[s], dense, 1.0);
          push_row(dense, lp::Sense::LessEqual, hi - c);
          push_row(dense, lp::Sense::GreaterEqual, lo - c);
        }
      }
      if (!added) return sol;
    }
  }

  std::vector<double> control(const lp::Solution& sol) const {
    std::vector<double> q;
    for (std::size_t j : m_.q_vars) q.push_back(sol.x[col_of_[j]]);
    return q;
  }

  double objective(const lp::Solution& sol) const { return sol.x[col_of_[m_.root]]; }

  const lp::Problem& problem() const { return prob_; }

 private:
  enum class Kind { Control, State, Robust, Binary };

  void add_column(std::size_t j) {
    col_of_[j] = prob_.lower.size();
    prob_.lower.push_back(m_.vars[j].lo);
    prob_.upper.push_back(m_.vars[j].hi);
  }

  // Adds scale * (affine part) of state j to dense and returns its constant.
  double substitute(std::size_t j, std::vector<double>& dense, double scale) const {
    const std::size_t s = state_index_[j];
    if (s == kNoVar) throw ConfigError("velocity variables cannot appear outside dynamics rows");
    const std::size_t k = s / aff_.nx1, i = s % aff_.nx1;
    for (std::size_t t = 0; t < k; ++t) dense[col_of_[m_.q_vars[t]]] += scale * aff_.coef(k, i, t);
    return aff_.free[s];
  }

  double state_value(std::size_t s, const std::vector<double>& x) const {
    const std::size_t k = s / aff_.nx1, i = s % aff_.nx1;
    double u = aff_.free[s];
    for (std::size_t t = 0; t < k; ++t) u += aff_.coef(k, i, t) * x[col_of_[m_.q_vars[t]]];
    return u;
  }

  void push_row(const std::vector<double>& dense, lp::Sense sense, double rhs) {
    lp::Row row;
    row.sense = sense;
    row.rhs = rhs;
    for (std::size_t c = 0; c < dense.size(); ++c)
      if (dense[c] != 0.0) row.terms.push_back({c, dense[c]});
    prob_.rows.push_back(std::move(row));
  }

  const MilpModel& m_;
  const AffineStates& aff_;
  std::vector<Kind> role_;
  std::vector<std::size_t> state_index_;
  std::vector<std::size_t> col_of_;
  lp::Problem prob_;
};

}  // namespace detail

struct BuiltinOptions {
  std::size_t combo_limit = 10000;
  std::optional<std::size_t> work_budget;  // total simplex pivots
  std::optional<double> time_budget_s;
};

/// Exact solve by enumerating every one-hot assignment of the selection
/// binaries (last group fastest) and solving the remaining LP. Budgets stop
/// the enumeration early with status TimedOut and the best incumbent.
inline SolveOutcome solve_builtin(const MilpModel& m, const BuiltinOptions& opt = {}) {
  detail::require_context(m);
  const double combos = m.combinations();
  if (combos > static_cast<double>(opt.combo_limit))
    throw ComboLimitExceeded(format_number(combos) + " binary assignments exceed the limit of " +
                             std::to_string(opt.combo_limit) + "; use an external solver");
  const auto start = std::chrono::steady_clock::now();
  const detail::AffineStates aff(m);

  SolveOutcome out;
  out.status = SolveStatus::Infeasible;
  std::optional<std::vector<double>> best_q;
  double best = -lp::kInf;
  detail::Assignment a{std::vector<std::size_t>(m.groups.size(), 0)};
  bool more = true;
  while (more) {
    detail::CondensedLp clp(m, aff, a);
    const lp::Solution sol = clp.solve(out.lps_solved);
    out.pivots += sol.pivots;
    if (sol.status == lp::Status::Optimal) {
      const double obj = clp.objective(sol);
      if (obj > best) {
        best = obj;
        best_q = clp.control(sol);
      }
    } else if (sol.status != lp::Status::Infeasible) {
      throw LpNumericalFailure(std::string("simplex ended with status ") + lp::to_string(sol.status));
    }
    more = detail::next_assignment(m, a);
    const bool over_work = opt.work_budget && out.pivots >= *opt.work_budget;
    const bool over_time =
        opt.time_budget_s &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= *opt.time_budget_s;
    if (more && (over_work || over_time)) {
      out.status = SolveStatus::TimedOut;
      out.message = over_work ? "work budget exhausted" : "time budget exhausted";
      break;
    }
  }
  if (!more && best_q) out.status = SolveStatus::Optimal;
  if (!best_q) return out;

  out.objective = best;
  detail::attach_solution(m, std::move(*best_q), out);
  if (!consistent(out.objective, out.robustness))
    throw LpNumericalFailure("objective " + format_number(out.objective) + " disagrees with re-simulated robustness " +
                             format_number(out.robustness));
  return out;
}

/// Solves the full model (all variables, all rows) with the binaries fixed
/// to `choice`. Meant for small instances; used as a cross-check of the
/// condensed path.
inline lp::Solution solve_full_lp(const MilpModel& m, const std::vector<std::size_t>& choice,
                                  const std::vector<std::size_t>& drop_rows = {}) {
  const auto z = detail::binary_values(m, detail::Assignment{choice});
  lp::Problem p;
  for (std::size_t j = 0; j < m.vars.size(); ++j) {
    p.lower.push_back(m.vars[j].binary ? z[j] : m.vars[j].lo);
    p.upper.push_back(m.vars[j].binary ? z[j] : m.vars[j].hi);
  }
  p.objective.assign(m.vars.size(), 0.0);
  for (const auto& [j, c] : m.objective) p.objective[j] += c;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (std::find(drop_rows.begin(), drop_rows.end(), r) != drop_rows.end()) continue;
    p.rows.push_back({m.rows[r].terms, m.rows[r].sense, m.rows[r].rhs});
  }
  return lp::solve(p);
}

struct ExternalOptions {
  std::string command;  // template with {lp}, {sol} and optionally {budget}
  double time_budget_s = 600.0;
  bool keep_files = false;
};

/// Command template from STLPDE_SOLVER when set, else `configured`.
inline std::string solver_command(const std::string& configured) {
  if (const char* env = std::getenv("STLPDE_SOLVER"); env && *env) return env;
  return configured;
}

namespace detail {

inline std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t p = s.find(from); p != std::string::npos; p = s.find(from, p + to.size())) s.replace(p, from.size(), to);
  return s;
}

inline std::string shell_quote(const std::string& s) { return "'" + replace_all(s, "'", "'\\''") + "'"; }

inline std::filesystem::path unique_temp_dir() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  const auto base = std::filesystem::temp_directory_path();
  for (int attempt = 0; attempt < 100; ++attempt) {
    const auto dir = base / ("stlpde-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + "-" +
                             std::to_string(rd()));
    if (std::filesystem::create_directory(dir)) return dir;
  }
  throw IoError("cannot create a temporary directory");
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Writes the model as an LP file, runs the command and reads back the
/// solution file of "name value" lines (plus optional "status", "objective"
/// and "gap" lines).
inline SolveOutcome solve_external(const MilpModel& m, const ExternalOptions& opt) {
  detail::require_context(m);
  const std::string tmpl = solver_command(opt.command);
  if (tmpl.empty()) throw ConfigError("no external solver command configured");
  if (tmpl.find("{lp}") == std::string::npos || tmpl.find("{sol}") == std::string::npos)
    throw ConfigError("solver command must contain {lp} and {sol}");

  const auto dir = detail::unique_temp_dir();
  struct Cleanup {
    std::filesystem::path dir;
    bool keep;
    ~Cleanup() {
      std::error_code ec;
      if (!keep) std::filesystem::remove_all(dir, ec);
    }
  } cleanup{dir, opt.keep_files};

  const auto lp_path = dir / "model.lp";
  const auto sol_path = dir / "model.sol";
  const auto err_path = dir / "stderr.txt";
  {
    std::ofstream out(lp_path);
    out << write_lp(m);
    if (!out) throw IoError("cannot write " + lp_path.string());
  }
  std::string cmd = detail::replace_all(tmpl, "{lp}", detail::shell_quote(lp_path.string()));
  cmd = detail::replace_all(cmd, "{sol}", detail::shell_quote(sol_path.string()));
  cmd = detail::replace_all(cmd, "{budget}", format_number(opt.time_budget_s));
  cmd = "(" + cmd + ") </dev/null >/dev/null 2>" + detail::shell_quote(err_path.string());

  const int raw = std::system(cmd.c_str());
  const std::string err = detail::slurp(err_path);
  const int code = raw == -1 ? -1 : (WIFEXITED(raw) ? WEXITSTATUS(raw) : 128 + WTERMSIG(raw));
  if (code != 0) throw SolverFailed("solver exited with code " + std::to_string(code) + ": " + err);
  if (!std::filesystem::exists(sol_path)) throw SolverFailed("solver wrote no solution file: " + err);

  SolveOutcome out;
  out.status = SolveStatus::Optimal;
  std::optional<double> objective;
  std::map<std::string, double> values;
  std::istringstream in(detail::slurp(sol_path));
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string name, val;
    if (!(ls >> name)) continue;
    if (name[0] == '#') continue;
    if (!(ls >> val)) throw SolverFailed("unparseable solution line: " + line);
    if (name == "status") {
      if (val == "optimal") out.status = SolveStatus::Optimal;
      else if (val == "feasible") out.status = SolveStatus::Feasible;
      else if (val == "infeasible") out.status = SolveStatus::Infeasible;
      else if (val == "timelimit" || val == "timed_out") out.status = SolveStatus::TimedOut;
      else throw SolverFailed("unknown solver status '" + val + "'");
      continue;
    }
    double v;
    if (!parse_double(val, v)) throw SolverFailed("unparseable value in line: " + line);
    if (name == "objective") objective = v;
    else if (name == "gap") out.gap = v;
    else values[name] = v;
  }
  if (out.status == SolveStatus::Infeasible) return out;

  std::vector<double> q;
  for (std::size_t j : m.q_vars) {
    auto it = values.find(m.vars[j].name);
    if (it == values.end()) {
      if (out.status == SolveStatus::TimedOut && values.empty()) return out;
      throw SolverFailed("solution lacks " + m.vars[j].name);
    }
    q.push_back(it->second);
  }
  if (out.status == SolveStatus::Optimal && out.gap && *out.gap > 1e-9) out.status = SolveStatus::Feasible;
  detail::attach_solution(m, std::move(q), out);
  out.objective = objective.value_or(values.count(m.vars[m.root].name) ? values[m.vars[m.root].name] : out.robustness);
  if (!consistent(out.objective, out.robustness)) {
    out.status = SolveStatus::SolverFailed;
    out.message = "solver objective " + format_number(out.objective) + " disagrees with re-simulated robustness " +
                  format_number(out.robustness);
  }
  return out;
}

struct SolverConfig {
  enum class Kind { Builtin, External } kind = Kind::Builtin;
  BuiltinOptions builtin;
  ExternalOptions external;
};

inline SolveOutcome solve(const MilpModel& m, const SolverConfig& cfg) {
  return cfg.kind == SolverConfig::Kind::Builtin ? solve_builtin(m, cfg.builtin) : solve_external(m, cfg.external);
}

}  // namespace stlpde

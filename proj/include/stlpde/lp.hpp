#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace stlpde::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Sense { LessEqual, GreaterEqual, Equal };

struct Row {
  std::vector<std::pair<std::size_t, double>> terms;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
};

/// maximize objective . x  subject to rows and lower <= x <= upper.
struct Problem {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> objective;
  std::vector<Row> rows;

  std::size_t num_vars() const { return objective.size(); }
};

enum class Status { Optimal, Infeasible, Unbounded, IterationLimit, NumericalFailure };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
    case Status::IterationLimit: return "iteration_limit";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct Options {
  double pivot_tol = 1e-9;
  double optimality_tol = 1e-9;
  double feasibility_tol = 1e-9;
  std::size_t max_pivots = 500000;
};

struct Solution {
  Status status = Status::NumericalFailure;
  double objective = 0.0;
  std::vector<double> x;
  std::size_t pivots = 0;  // simplex iterations, bound flips included
  double max_violation = 0.0;
};

namespace detail {

/// Dense tableau simplex over columns [structural | slack | artificial] with
/// every row written as a.x + s = b and the row sense moved into the slack
/// bounds. Entering and leaving choices follow Bland's rule.
class Tableau {
 public:
  Tableau(const Problem& p, const Options& opt) : opt_(opt) {
    m_ = p.rows.size();
    n_ = p.num_vars();
    scale_rows_and_columns(p);
    build(p);
  }

  Solution run(const Problem& p) {
    Solution sol;
    // Phase 1: drive the artificial variables to zero.
    std::vector<double> cost(cols_, 0.0);
    for (std::size_t j = art_begin_; j < cols_; ++j) cost[j] = -1.0;
    Status st = optimize(cost, sol.pivots);
    if (st != Status::Optimal) {
      sol.status = st == Status::Unbounded ? Status::NumericalFailure : st;
      return sol;
    }
    double infeas = 0.0;
    for (std::size_t j = art_begin_; j < cols_; ++j) infeas += value_[j];
    if (infeas > phase1_tol_) {
      sol.status = Status::Infeasible;
      return sol;
    }
    expel_artificials(sol.pivots);

    // Phase 2: original objective.
    std::fill(cost.begin(), cost.end(), 0.0);
    for (std::size_t j = 0; j < n_; ++j) cost[j] = p.objective[j] * col_scale_[j];
    st = optimize(cost, sol.pivots);
    if (st != Status::Optimal) {
      sol.status = st;
      return sol;
    }
    refine();

    sol.x.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      double v = value_[j] * col_scale_[j];
      v = std::clamp(v, p.lower[j], p.upper[j]);
      sol.x[j] = v;
    }
    sol.objective = 0.0;
    for (std::size_t j = 0; j < n_; ++j) sol.objective += p.objective[j] * sol.x[j];
    sol.max_violation = max_row_violation(p, sol.x);
    sol.status = Status::Optimal;
    return sol;
  }

 private:
  void scale_rows_and_columns(const Problem& p) {
    row_scale_.assign(m_, 1.0);
    col_scale_.assign(n_, 1.0);
    for (std::size_t i = 0; i < m_; ++i) {
      double big = 0.0;
      for (const auto& [j, a] : p.rows[i].terms) big = std::max(big, std::fabs(a));
      if (big > 0.0) row_scale_[i] = 1.0 / big;
    }
    std::vector<double> colmax(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i)
      for (const auto& [j, a] : p.rows[i].terms) colmax[j] = std::max(colmax[j], std::fabs(a * row_scale_[i]));
    for (std::size_t j = 0; j < n_; ++j)
      if (colmax[j] > 0.0) col_scale_[j] = 1.0 / colmax[j];
  }

  double& cell(std::size_t i, std::size_t j) { return tab_[i * cols_ + j]; }

  void build(const Problem& p) {
    // Structural columns start at a finite bound (or 0 when free).
    lo_.clear();
    hi_.clear();
    for (std::size_t j = 0; j < n_; ++j) {
      lo_.push_back(p.lower[j] / col_scale_[j]);
      hi_.push_back(p.upper[j] / col_scale_[j]);
    }
    for (std::size_t i = 0; i < m_; ++i) {
      switch (p.rows[i].sense) {
        case Sense::LessEqual: lo_.push_back(0.0), hi_.push_back(kInf); break;
        case Sense::GreaterEqual: lo_.push_back(-kInf), hi_.push_back(0.0); break;
        case Sense::Equal: lo_.push_back(0.0), hi_.push_back(0.0); break;
      }
    }
    std::vector<double> start(n_ + m_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) start[j] = rest_value(j);

    // Residual of each row with every slack at zero decides whether the
    // slack can start basic or an artificial is needed.
    rhs_.assign(m_, 0.0);
    std::vector<double> resid(m_, 0.0);
    double bmax = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      rhs_[i] = p.rows[i].rhs * row_scale_[i];
      double ax = 0.0;
      for (const auto& [j, a] : p.rows[i].terms) ax += a * row_scale_[i] * col_scale_[j] * start[j];
      resid[i] = rhs_[i] - ax;
      bmax = std::max(bmax, std::fabs(rhs_[i]));
    }
    phase1_tol_ = 1e-8 * std::max(1.0, bmax);

    std::vector<std::size_t> art_rows;
    std::vector<bool> slack_basic(m_, false);
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t s = n_ + i;
      if (resid[i] >= lo_[s] && resid[i] <= hi_[s]) slack_basic[i] = true;
      else art_rows.push_back(i);
    }
    art_begin_ = n_ + m_;
    cols_ = art_begin_ + art_rows.size();
    for (std::size_t r = 0; r < art_rows.size(); ++r) {
      lo_.push_back(0.0);
      hi_.push_back(kInf);
    }

    tab_.assign(m_ * cols_, 0.0);
    value_.assign(cols_, 0.0);
    basis_.assign(m_, 0);
    is_basic_.assign(cols_, false);
    for (std::size_t j = 0; j < n_ + m_; ++j) value_[j] = start[j];

    std::vector<double> sign(m_, 1.0);
    std::size_t next_art = art_begin_;
    for (std::size_t i = 0; i < m_; ++i) {
      if (!slack_basic[i]) {
        // slack rests at its bound nearest zero (0 for all senses)
        const double need = resid[i];
        sign[i] = need >= 0.0 ? 1.0 : -1.0;
        cell(i, next_art) = 1.0;
        basis_[i] = next_art;
        value_[next_art] = std::fabs(need);
        ++next_art;
      } else {
        basis_[i] = n_ + i;
        value_[n_ + i] = resid[i];
      }
      is_basic_[basis_[i]] = true;
      for (const auto& [j, a] : p.rows[i].terms) cell(i, j) += sign[i] * a * row_scale_[i] * col_scale_[j];
      cell(i, n_ + i) = sign[i];
      rhs_[i] *= sign[i];
    }
    art_map_ = std::move(art_rows);
  }

  double rest_value(std::size_t j) const {
    if (std::isfinite(lo_[j])) return lo_[j];
    if (std::isfinite(hi_[j])) return hi_[j];
    return 0.0;
  }

  Status optimize(const std::vector<double>& cost, std::size_t& pivots) {
    // reduced costs d = c - c_B T
    std::vector<double> d(cost);
    for (std::size_t i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &tab_[i * cols_];
      for (std::size_t j = 0; j < cols_; ++j) d[j] -= cb * row[j];
    }
    for (std::size_t i = 0; i < m_; ++i) d[basis_[i]] = 0.0;

    std::vector<double> column(m_);
    for (;;) {
      if (pivots >= opt_.max_pivots) return Status::IterationLimit;
      std::size_t enter = cols_;
      double dir = 0.0;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (is_basic_[j] || lo_[j] == hi_[j]) continue;
        if (d[j] > opt_.optimality_tol && value_[j] < hi_[j]) {
          enter = j, dir = 1.0;
          break;
        }
        if (d[j] < -opt_.optimality_tol && value_[j] > lo_[j]) {
          enter = j, dir = -1.0;
          break;
        }
      }
      if (enter == cols_) return Status::Optimal;

      double theta = hi_[enter] - lo_[enter];
      std::size_t leave_row = m_;
      for (std::size_t i = 0; i < m_; ++i) {
        const double alpha = dir * tab_[i * cols_ + enter];
        if (std::fabs(alpha) <= opt_.pivot_tol) continue;
        const std::size_t b = basis_[i];
        double limit;
        if (alpha > 0.0) {
          if (!std::isfinite(lo_[b])) continue;
          limit = (value_[b] - lo_[b]) / alpha;
        } else {
          if (!std::isfinite(hi_[b])) continue;
          limit = (hi_[b] - value_[b]) / -alpha;
        }
        limit = std::max(limit, 0.0);
        if (limit < theta || (limit == theta && leave_row < m_ && b < basis_[leave_row])) {
          theta = limit;
          leave_row = i;
        }
      }
      if (!std::isfinite(theta)) return Status::Unbounded;

      value_[enter] += dir * theta;
      for (std::size_t i = 0; i < m_; ++i) value_[basis_[i]] -= dir * theta * tab_[i * cols_ + enter];
      if (leave_row == m_) {
        // bound flip of the entering variable
        value_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
        ++pivots;
        continue;
      }
      const std::size_t leaving = basis_[leave_row];
      const double alpha = dir * tab_[leave_row * cols_ + enter];
      value_[leaving] = alpha > 0.0 ? lo_[leaving] : hi_[leaving];
      pivot(leave_row, enter, d, column);
      ++pivots;
    }
  }

  void pivot(std::size_t r, std::size_t enter, std::vector<double>& d, std::vector<double>& column) {
    double* prow = &tab_[r * cols_];
    const double inv = 1.0 / prow[enter];
    for (std::size_t j = 0; j < cols_; ++j) prow[j] *= inv;
    rhs_[r] *= inv;
    for (std::size_t i = 0; i < m_; ++i) column[i] = tab_[i * cols_ + enter];
    for (std::size_t i = 0; i < m_; ++i) {
      if (i == r) continue;
      const double f = column[i];
      if (f == 0.0) continue;
      double* row = &tab_[i * cols_];
      for (std::size_t j = 0; j < cols_; ++j) row[j] -= f * prow[j];
      row[enter] = 0.0;
      rhs_[i] -= f * rhs_[r];
    }
    const double fd = d[enter];
    if (fd != 0.0)
      for (std::size_t j = 0; j < cols_; ++j) d[j] -= fd * prow[j];
    d[enter] = 0.0;
    is_basic_[basis_[r]] = false;
    basis_[r] = enter;
    is_basic_[enter] = true;
  }

  void expel_artificials(std::size_t& pivots) {
    std::vector<double> d(cols_, 0.0);
    std::vector<double> column(m_);
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < art_begin_) continue;
      std::size_t best = cols_;
      double best_abs = 1e-7;
      for (std::size_t j = 0; j < art_begin_; ++j) {
        if (is_basic_[j]) continue;
        const double a = std::fabs(tab_[r * cols_ + j]);
        if (a > best_abs) {
          best_abs = a;
          best = j;
        }
      }
      if (best == cols_) continue;  // redundant row
      const std::size_t art = basis_[r];
      pivot(r, best, d, column);
      value_[art] = 0.0;
      ++pivots;
    }
    for (std::size_t j = art_begin_; j < cols_; ++j) {
      hi_[j] = 0.0;
      if (!is_basic_[j]) value_[j] = 0.0;
    }
  }

  /// Recomputes basic values from the original scaled columns: B x_B = b - N x_N.
  void refine() {
    if (m_ == 0) return;
    std::vector<double> b(m_, 0.0);
    std::vector<double> bmat(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) b[i] = orig_rhs(i);
    for (std::size_t j = 0; j < cols_; ++j) {
      if (is_basic_[j] || value_[j] == 0.0) continue;
      for (std::size_t i = 0; i < m_; ++i) b[i] -= orig(i, j) * value_[j];
    }
    for (std::size_t c = 0; c < m_; ++c)
      for (std::size_t i = 0; i < m_; ++i) bmat[i * m_ + c] = orig(i, basis_[c]);
    std::vector<double> xb;
    if (!dense_solve(bmat, b, m_, xb)) return;
    for (std::size_t c = 0; c < m_; ++c) value_[basis_[c]] = xb[c];
  }

  // The unscaled-by-sign original column entries are kept implicitly: the
  // tableau was built as sign * A, so the original is recovered through the
  // snapshot taken at construction.
  double orig(std::size_t i, std::size_t j) const { return orig_[i * cols_ + j]; }
  double orig_rhs(std::size_t i) const { return orig_rhs_[i]; }

 public:
  void snapshot() {
    orig_ = tab_;
    orig_rhs_ = rhs_;
  }

 private:
  static bool dense_solve(std::vector<double> a, std::vector<double> b, std::size_t n, std::vector<double>& x) {
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::fabs(a[i * n + k]) > std::fabs(a[piv * n + k])) piv = i;
      if (std::fabs(a[piv * n + k]) < 1e-13) return false;
      if (piv != k) {
        for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[piv * n + j]);
        std::swap(b[k], b[piv]);
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        const double f = a[i * n + k] / a[k * n + k];
        if (f == 0.0) continue;
        for (std::size_t j = k; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
        b[i] -= f * b[k];
      }
    }
    x.assign(n, 0.0);
    for (std::size_t k = n; k-- > 0;) {
      double s = b[k];
      for (std::size_t j = k + 1; j < n; ++j) s -= a[k * n + j] * x[j];
      x[k] = s / a[k * n + k];
    }
    return true;
  }

  static double max_row_violation(const Problem& p, const std::vector<double>& x) {
    double worst = 0.0;
    for (const auto& row : p.rows) {
      double ax = 0.0, mag = std::fabs(row.rhs);
      for (const auto& [j, a] : row.terms) {
        ax += a * x[j];
        mag = std::max(mag, std::fabs(a * x[j]));
      }
      double v = 0.0;
      switch (row.sense) {
        case Sense::LessEqual: v = std::max(0.0, ax - row.rhs); break;
        case Sense::GreaterEqual: v = std::max(0.0, row.rhs - ax); break;
        case Sense::Equal: v = std::fabs(ax - row.rhs); break;
      }
      worst = std::max(worst, v / std::max(1.0, mag));
    }
    return worst;
  }

  Options opt_;
  std::size_t m_ = 0, n_ = 0, cols_ = 0, art_begin_ = 0;
  std::vector<double> row_scale_, col_scale_;
  std::vector<double> tab_, rhs_, orig_, orig_rhs_;
  std::vector<double> lo_, hi_, value_;
  std::vector<std::size_t> basis_, art_map_;
  std::vector<bool> is_basic_;
  double phase1_tol_ = 1e-8;
};

}  // namespace detail

/// Solves the LP with a two-phase dense simplex. Every variable needs a
/// finite bound on at least one side or is treated as free starting at 0.
inline Solution solve(const Problem& p, const Options& opt = {}) {
  for (std::size_t j = 0; j < p.num_vars(); ++j) {
    if (p.lower[j] > p.upper[j]) {
      Solution s;
      s.status = Status::Infeasible;
      return s;
    }
  }
  detail::Tableau t(p, opt);
  t.snapshot();
  return t.run(p);
}

}  // namespace stlpde::lp

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "stlpde/errors.hpp"
#include "stlpde/problem_io.hpp"
#include "stlpde/stl.hpp"
#include "stlpde/system.hpp"

namespace stlpde {

/// Half-width of the band standing in for an equality atom, as a fraction of the u-range.
inline constexpr double kEqualityBand = 0.005;
/// Width given to a zero-length window or range, as a fraction of tmax or L.
inline constexpr double kDegenerateWidth = 0.01;

namespace detail {

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
  double at(double x) const { return slope * x + intercept; }
};

struct Extent {
  std::vector<Line> lo;  // u >= max(lo)
  std::vector<Line> hi;  // u <= min(hi)
};

inline Extent u_extent(const LinearPredicate& p, double u_lo, double u_hi) {
  const Line mu{p.a, p.b};
  const double band = kEqualityBand * (u_hi - u_lo);
  Extent e{{{0.0, u_lo}}, {{0.0, u_hi}}};
  switch (p.cmp) {
    case Cmp::GT: e.lo.push_back(mu); break;
    case Cmp::LT: e.hi.push_back(mu); break;
    case Cmp::EQ:
      e.lo.push_back({p.a, p.b - band});
      e.hi.push_back({p.a, p.b + band});
      break;
  }
  return e;
}

/// Exact integral over [x0, x1] of max(0, min(hi) - max(lo)). The integrand
/// is linear between pairwise crossings of the lines, so the trapezoid rule
/// over those breakpoints is exact.
inline double extent_area(const Extent& e, double x0, double x1) {
  if (!(x1 > x0)) return 0.0;
  std::vector<Line> all = e.lo;
  all.insert(all.end(), e.hi.begin(), e.hi.end());
  std::vector<double> xs{x0, x1};
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      const double ds = all[i].slope - all[j].slope;
      if (ds == 0.0) continue;
      const double x = (all[j].intercept - all[i].intercept) / ds;
      if (x > x0 && x < x1) xs.push_back(x);
    }
  std::sort(xs.begin(), xs.end());
  auto g = [&](double x) {
    double lo = -HUGE_VAL, hi = HUGE_VAL;
    for (const auto& l : e.lo) lo = std::max(lo, l.at(x));
    for (const auto& h : e.hi) hi = std::min(hi, h.at(x));
    return std::max(0.0, hi - lo);
  };
  double area = 0.0;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) area += 0.5 * (g(xs[k]) + g(xs[k + 1])) * (xs[k + 1] - xs[k]);
  return area;
}

inline std::pair<double, double> widen(double lo, double hi, double span) {
  if (hi > lo) return {lo, hi};
  const double half = 0.5 * kDegenerateWidth * span;
  double a = lo - half, b = hi + half;
  if (a < 0.0) b -= a, a = 0.0;
  if (b > span) a -= b - span, b = span;
  return {std::max(0.0, a), b};
}

}  // namespace detail

/// The (x, t, u) box an atom asks for: x and t ranges (degenerate ones
/// widened) and the u side of the profile clipped to [u_lo, u_hi].
struct SatisfyingBox {
  double x_lo, x_hi, t_lo, t_hi;
  detail::Extent u;
};

inline SatisfyingBox satisfying_box(const TemporalAtom& a, const PdeSystem& sys) {
  const auto [x0, x1] = detail::widen(a.pred.x_lo, a.pred.x_hi, sys.length);
  const auto [t0, t1] = detail::widen(a.t_lo, a.t_hi, sys.tmax);
  return {x0, x1, t0, t1, detail::u_extent(a.pred, sys.state_lo(), sys.state_hi())};
}

inline double box_volume(const SatisfyingBox& b) {
  return (b.t_hi - b.t_lo) * detail::extent_area(b.u, b.x_lo, b.x_hi);
}

inline double intersection_volume(const SatisfyingBox& p, const SatisfyingBox& q) {
  const double t = std::min(p.t_hi, q.t_hi) - std::max(p.t_lo, q.t_lo);
  if (t <= 0.0) return 0.0;
  detail::Extent both = p.u;
  both.lo.insert(both.lo.end(), q.u.lo.begin(), q.u.lo.end());
  both.hi.insert(both.hi.end(), q.u.hi.begin(), q.u.hi.end());
  return t * detail::extent_area(both, std::max(p.x_lo, q.x_lo), std::min(p.x_hi, q.x_hi));
}

inline double atom_iou(const TemporalAtom& p, const TemporalAtom& q, const PdeSystem& sys) {
  const SatisfyingBox bp = satisfying_box(p, sys), bq = satisfying_box(q, sys);
  const double inter = intersection_volume(bp, bq);
  const double uni = box_volume(bp) + box_volume(bq) - inter;
  if (!(uni > 0.0)) return p == q ? 1.0 : 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

/// Mean per-atom box IoU for structurally identical formulas, 0 otherwise
/// and 0 for a missing or invalid candidate.
inline double iou(const Formula& truth, const std::optional<Formula>& cand, const PdeSystem& sys) {
  const auto report = validate(truth, sys);
  if (!report.valid) throw DomainMismatch("reference formula: " + report.issues.front());
  if (!cand || !validate(*cand, sys).valid) return 0.0;
  if (!same_structure(truth, *cand)) return 0.0;
  const auto ta = truth.atoms(), ca = cand->atoms();
  double sum = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) sum += atom_iou(ta[i], ca[i], sys);
  return sum / static_cast<double>(ta.size());
}

inline constexpr double kRelativeErrorFloor = 1e-6;

/// Root mean square of (r_cand - r_true) / max(|r_true|, eps) over (r_true, r_cand) pairs.
inline double utility_rmse(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw EmptyInput("no utility pairs");
  double sum = 0.0;
  for (const auto& [r_true, r_cand] : pairs) {
    const double e = (r_cand - r_true) / std::max(std::fabs(r_true), kRelativeErrorFloor);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

inline double validity_rate(const std::vector<bool>& valid) {
  if (valid.empty()) throw EmptyInput("no outcomes");
  return static_cast<double>(std::count(valid.begin(), valid.end(), true)) / static_cast<double>(valid.size());
}

/// One line of an evaluation batch.
struct EvalRecord {
  Formula truth;
  std::optional<Formula> cand;  // empty when the candidate did not parse
  std::optional<double> r_true;
  std::optional<double> r_cand;
  std::optional<PdeSystem> sys;
};

struct EvalScore {
  bool valid = false;
  double iou = 0.0;
  std::optional<double> relative_error;
};

struct EvalReport {
  std::vector<EvalScore> records;
  double mean_iou = 0.0;
  double validity = 0.0;
  std::optional<double> rmse;  // null when no valid candidate carries both utilities
};

/// Reads {"truth_cspec", "cand_cspec" | "cand_invalid", "r_true", "r_cand", "system"?}.
/// A candidate that fails to parse counts as invalid; a bad reference is an error.
inline EvalRecord eval_record_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("truth_cspec")) throw ConfigError("eval record needs 'truth_cspec'");
  EvalRecord rec{formula_from_json(j["truth_cspec"]), std::nullopt, std::nullopt, std::nullopt, std::nullopt};
  if (!j.value("cand_invalid", false) && j.contains("cand_cspec")) {
    try {
      rec.cand = formula_from_json(j["cand_cspec"]);
    } catch (const Error&) {
      rec.cand.reset();
    } catch (const Json::exception&) {
      rec.cand.reset();
    }
  }
  if (j.contains("r_true") && j["r_true"].is_number()) rec.r_true = j["r_true"].get<double>();
  if (j.contains("r_cand") && j["r_cand"].is_number()) rec.r_cand = j["r_cand"].get<double>();
  if (j.contains("system")) rec.sys = system_from_json(j["system"]);
  return rec;
}

inline EvalReport evaluate(const std::vector<EvalRecord>& batch, const std::optional<PdeSystem>& fallback) {
  if (batch.empty()) throw EmptyInput("empty evaluation batch");
  EvalReport rep;
  std::vector<bool> valid;
  std::vector<std::pair<double, double>> pairs;
  double iou_sum = 0.0;
  for (const auto& r : batch) {
    const PdeSystem* sys = r.sys ? &*r.sys : fallback ? &*fallback : nullptr;
    if (!sys) throw ConfigError("record has no 'system' and no default system was given");
    EvalScore s;
    s.valid = r.cand && validate(*r.cand, *sys).valid;
    s.iou = iou(r.truth, r.cand, *sys);
    if (s.valid && r.r_true && r.r_cand) {
      pairs.emplace_back(*r.r_true, *r.r_cand);
      s.relative_error = (*r.r_cand - *r.r_true) / std::max(std::fabs(*r.r_true), kRelativeErrorFloor);
    }
    iou_sum += s.iou;
    valid.push_back(s.valid);
    rep.records.push_back(s);
  }
  rep.mean_iou = iou_sum / static_cast<double>(batch.size());
  rep.validity = validity_rate(valid);
  if (!pairs.empty()) rep.rmse = utility_rmse(pairs);
  return rep;
}

inline Json eval_report_to_json(const EvalReport& rep) {
  Json recs = Json::array();
  for (const auto& s : rep.records) {
    Json j{{"valid", s.valid}, {"iou", s.iou}};
    j["relative_error"] = s.relative_error ? Json(*s.relative_error) : Json(nullptr);
    recs.push_back(j);
  }
  Json agg{{"records", rep.records.size()}, {"mean_iou", rep.mean_iou}, {"validity_rate", rep.validity}};
  agg["utility_rmse"] = rep.rmse ? Json(*rep.rmse) : Json(nullptr);
  return Json{{"aggregate", agg}, {"records", recs}};
}

}  // namespace stlpde

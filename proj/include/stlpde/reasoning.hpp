#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "stlpde/errors.hpp"
#include "stlpde/fem.hpp"
#include "stlpde/milp.hpp"
#include "stlpde/problem_io.hpp"
#include "stlpde/semantics.hpp"
#include "stlpde/solve.hpp"
#include "stlpde/stl.hpp"
#include "stlpde/util.hpp"

namespace stlpde {

/// Solver settings for the anchor (direct and second-phase) and subgoal solves.
struct ReasoningConfig {
  SolverConfig anchor;
  SolverConfig subgoal;
  std::size_t jobs = 1;
};

inline ReasoningConfig default_reasoning_config() {
  ReasoningConfig cfg;
  cfg.anchor.builtin.time_budget_s = 600.0;
  cfg.anchor.external.time_budget_s = 600.0;
  cfg.subgoal.builtin.time_budget_s = 120.0;
  cfg.subgoal.external.time_budget_s = 120.0;
  return cfg;
}

/// Solves `f` on the problem grid from `u_init` and returns the outcome.
inline SolveOutcome solve_problem(const PdeSystem& sys, const Discretization& disc, const Formula& f,
                                  std::span<const double> u_init, const SolverConfig& cfg) {
  return solve(encode(sys, disc, f, u_init), cfg);
}

inline SolveOutcome solve_problem(const Problem& p, const SolverConfig& cfg) {
  return solve_problem(p.sys, p.disc, p.formula, p.sys.u0.on_nodes(p.disc.nx), cfg);
}

/// Draws a subgoal with the anchor's shape, operators, comparisons and
/// spatial ranges, with fresh windows before the anchor starts and a
/// perturbed profile.
inline Formula sample_subgoal(const Formula& anchor, const PdeSystem& sys, const Discretization& disc,
                              std::uint64_t seed) {
  const double t_pre = earliest_start(anchor);
  const double dt = disc.dt(sys);
  if (t_pre <= 2.0 * dt)
    throw NoPreWindow("anchor starts at " + format_number(t_pre) + " s, leaving no room before it");
  Rng rng(seed);
  const int t_dec = sys.kind == PdeKind::Heat ? 2 : 3;
  const double shift_scale = 0.1 * (sys.state_hi() - sys.state_lo());
  return anchor.map_atoms([&](const TemporalAtom& a) {
    TemporalAtom s = a;
    const double t1 = rng.uniform(0.0, t_pre);
    const double t2 = rng.uniform(t1, t_pre);
    s.t_lo = quantize(t1, t_dec, 0.0, t_pre);
    s.t_hi = std::max(s.t_lo, std::min(quantize(t2, t_dec, 0.0, t_pre), t_pre));
    s.pred.a = quantize_sig(a.pred.a * rng.uniform(0.5, 1.5), 4, -1e300, 1e300);
    s.pred.b = quantize(a.pred.b + rng.uniform(-0.3, 0.3) * shift_scale, 4, -1e300, 1e300);
    return s;
  });
}

struct ChainResult {
  double r_direct = 0.0;
  double r_chained = 0.0;
  Formula subgoal;
  double t_s = 0.0;
  bool success = false;
  bool evaluated = false;  // both phases produced a control
  SolveStatus subgoal_status = SolveStatus::SolverFailed;
  SolveStatus anchor_status = SolveStatus::SolverFailed;
  ControlTrajectory control = {};  // concatenated control of both phases
};

inline bool usable(const SolveOutcome& o) {
  return o.has_solution && o.status != SolveStatus::SolverFailed && o.status != SolveStatus::Infeasible;
}

/// Solves the subgoal, hands its state at t_s to a second solve of the
/// anchor shifted by -t_s, and compares against `direct` (the anchor solved
/// from the original initial condition).
inline ChainResult chain(const Problem& p, const Formula& subgoal, const SolveOutcome& direct,
                         const ReasoningConfig& cfg) {
  const double t_pre = earliest_start(p.formula);
  const double t_end = latest_end(subgoal);
  if (t_end > t_pre + 1e-9 * std::max(1.0, t_pre))
    throw ScheduleConflict("subgoal ends at " + format_number(t_end) + " s, after the anchor starts at " +
                           format_number(t_pre) + " s");
  if (!validate(subgoal, p.sys).valid) throw DomainMismatch("subgoal is not valid on this system");

  ChainResult res{.subgoal = subgoal};
  if (!usable(direct)) throw SolverFailed("direct anchor solve produced no control");
  res.r_direct = direct.robustness;

  const auto u_init = p.sys.u0.on_nodes(p.disc.nx);
  const SolveOutcome first = solve_problem(p.sys, p.disc, subgoal, u_init, cfg.subgoal);
  res.subgoal_status = first.status;
  if (!usable(first)) return res;

  const std::size_t k_s = nearest_step(first.trajectory.ts, t_end);
  if (k_s >= p.disc.nt) throw ScheduleConflict("switch time leaves no steps for the anchor");
  res.t_s = first.trajectory.ts[k_s];
  const auto row = first.trajectory.row(k_s);

  PdeSystem sys2 = p.sys;
  sys2.tmax = p.sys.tmax - res.t_s;
  sys2.u0 = InitialProfile::sampled({row.begin(), row.end()});
  Discretization disc2 = p.disc;
  disc2.nt = p.disc.nt - k_s;
  const Formula shifted = shift_time(p.formula, -res.t_s);
  const SolveOutcome second = solve_problem(sys2, disc2, shifted, sys2.u0.nodes, cfg.anchor);
  res.anchor_status = second.status;
  if (!usable(second)) return res;

  // Utility of the anchor under the concatenated control on the full horizon.
  std::vector<double> q(first.control.values.begin(), first.control.values.begin() + static_cast<std::ptrdiff_t>(k_s));
  q.insert(q.end(), second.control.values.begin(), second.control.values.end());
  res.control = ControlTrajectory{std::move(q), p.sys.q_max};
  res.r_chained = eval_robustness(p.formula, simulate(p.sys, p.disc, res.control));
  res.evaluated = true;
  res.success = res.r_chained > res.r_direct;
  return res;
}

inline ChainResult chain(const Problem& p, const Formula& subgoal, const ReasoningConfig& cfg) {
  return chain(p, subgoal, solve_problem(p, cfg.anchor), cfg);
}

enum class Difficulty { Easy, Medium, Hard };

inline const char* to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy: return "easy";
    case Difficulty::Medium: return "medium";
    case Difficulty::Hard: return "hard";
  }
  return "?";
}

/// Buckets a random-sampling success rate with the per-kind cuts.
inline Difficulty difficulty(PdeKind kind, double success_rate) {
  const double easy = kind == PdeKind::Heat ? 0.8 : 0.88;
  const double medium = kind == PdeKind::Heat ? 0.5 : 0.55;
  if (success_rate > easy) return Difficulty::Easy;
  if (success_rate > medium) return Difficulty::Medium;
  return Difficulty::Hard;
}

struct SampleRecord {
  std::uint64_t seed = 0;
  std::optional<ChainResult> result;
  std::string error;  // set when the sample could not be drawn or solved
  ErrorKind error_kind = ErrorKind::Config;
};

struct ReasoningStats {
  std::optional<double> success_rate;  // null when no sample could be drawn
  std::optional<double> utility_gain;  // mean over evaluated samples
  std::optional<Difficulty> difficulty;
  std::size_t samples = 0;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
  std::size_t no_pre_window = 0;
};

struct BaselineReport {
  double r_direct = 0.0;
  SolveStatus direct_status = SolveStatus::SolverFailed;
  ReasoningStats stats;
  std::vector<SampleRecord> samples;
};

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

inline ReasoningStats summarize(PdeKind kind, const std::vector<SampleRecord>& samples) {
  ReasoningStats st;
  st.samples = samples.size();
  std::size_t attempted = 0, successes = 0;
  double gain_sum = 0.0;
  for (const auto& s : samples) {
    if (!s.result && s.error_kind == ErrorKind::NoPreWindow) {
      ++st.no_pre_window;
      continue;
    }
    ++attempted;
    if (s.result && s.result->evaluated) {
      ++st.evaluated;
      if (s.result->success) ++successes;
      gain_sum += s.result->r_chained - s.result->r_direct;
    } else {
      ++st.excluded;
    }
  }
  if (attempted > 0) {
    st.success_rate = static_cast<double>(successes) / static_cast<double>(attempted);
    st.difficulty = difficulty(kind, *st.success_rate);
  }
  if (st.evaluated > 0) st.utility_gain = gain_sum / static_cast<double>(st.evaluated);
  return st;
}

/// Random-sampling baseline: n subgoals drawn with seeds mix_seed(seed, i),
/// each chained against one shared direct solve.
inline BaselineReport run_baseline(const Problem& p, std::size_t n_samples, std::uint64_t seed,
                                   const ReasoningConfig& cfg) {
  if (n_samples < 1) throw ConfigError("need at least one sample");
  BaselineReport rep;
  const SolveOutcome direct = solve_problem(p, cfg.anchor);
  rep.direct_status = direct.status;
  if (!usable(direct)) throw SolverFailed("direct anchor solve produced no control (" + std::string(to_string(direct.status)) + ")");
  rep.r_direct = direct.robustness;

  rep.samples.resize(n_samples);
  parallel_for(n_samples, cfg.jobs, [&](std::size_t i) {
    SampleRecord& rec = rep.samples[i];
    rec.seed = mix_seed(seed, i);
    try {
      const Formula sub = sample_subgoal(p.formula, p.sys, p.disc, rec.seed);
      rec.result = chain(p, sub, direct, cfg);
    } catch (const Error& e) {
      rec.result.reset();
      rec.error = e.what();
      rec.error_kind = e.kind();
    }
  });
  rep.stats = summarize(p.sys.kind, rep.samples);
  return rep;
}

struct PreferencePair {
  Formula winner;
  Formula loser;
  double r_winner = 0.0;
  double r_loser = 0.0;
  double r_direct = 0.0;
  std::uint64_t winner_seed = 0;
  std::uint64_t loser_seed = 0;
};

/// Winners (r_chained > r_direct) crossed with losers (r_chained <= r_direct)
/// in sample order, at most `cap` pairs.
inline std::vector<PreferencePair> build_preference_pairs(const std::vector<SampleRecord>& samples, std::size_t cap) {
  std::vector<const SampleRecord*> winners, losers;
  for (const auto& s : samples) {
    if (!s.result || !s.result->evaluated) continue;
    (s.result->success ? winners : losers).push_back(&s);
  }
  if (winners.empty() || losers.empty())
    throw NoPairs(std::to_string(winners.size()) + " winners and " + std::to_string(losers.size()) + " losers");
  std::vector<PreferencePair> out;
  for (const auto* w : winners)
    for (const auto* l : losers) {
      if (out.size() >= cap) return out;
      out.push_back({w->result->subgoal, l->result->subgoal, w->result->r_chained, l->result->r_chained,
                     w->result->r_direct, w->seed, l->seed});
    }
  return out;
}

inline Json pair_to_json(const PreferencePair& pair, const std::string& nl, const Formula& anchor, std::uint64_t seed) {
  return Json{{"nl", nl},
              {"anchor_cspec", formula_to_json(anchor)},
              {"winner_cspec", formula_to_json(pair.winner)},
              {"loser_cspec", formula_to_json(pair.loser)},
              {"r_direct", pair.r_direct},
              {"r_winner", pair.r_winner},
              {"r_loser", pair.r_loser},
              {"seed", seed}};
}

inline Json stats_to_json(const ReasoningStats& st) {
  Json j;
  j["success_rate"] = st.success_rate ? Json(*st.success_rate) : Json(nullptr);
  j["utility_gain"] = st.utility_gain ? Json(*st.utility_gain) : Json(nullptr);
  j["difficulty"] = st.difficulty ? Json(to_string(*st.difficulty)) : Json(nullptr);
  j["samples"] = st.samples;
  j["evaluated"] = st.evaluated;
  j["excluded"] = st.excluded;
  j["no_pre_window"] = st.no_pre_window;
  return j;
}

}  // namespace stlpde

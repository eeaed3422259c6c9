#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace stlpde;
using namespace testing_support;

namespace {

Formula g_atom(double t0, double t1, double x0, double x1, double b, Cmp cmp = Cmp::GT) {
  return Formula::atom(make_atom(TemporalOp::G, t0, t1, x0, x1, cmp, 0, b));
}

Formula f_atom(double t0, double t1, double x0, double x1, double b, Cmp cmp = Cmp::GT) {
  return Formula::atom(make_atom(TemporalOp::F, t0, t1, x0, x1, cmp, 0, b));
}

bool scipy_available() {
  static const bool ok = std::system("python3 -c 'import scipy.optimize' >/dev/null 2>&1") == 0;
  return ok;
}

SolverConfig external_config() {
  SolverConfig cfg;
  cfg.kind = SolverConfig::Kind::External;
  cfg.external.command = std::string("python3 ") + STLPDE_SCIPY_SCRIPT + " {lp} {sol} {budget}";
  cfg.external.time_budget_s = 60;
  return cfg;
}

}  // namespace

TEST(Encode, BinaryCounts) {
  const PdeSystem sys = heat_rod();
  const Discretization disc{4, 10};  // dt = 0.5
  EXPECT_EQ(encode(sys, disc, g_atom(1, 3, 0, 100, 290)).num_binaries(), 0u);
  EXPECT_EQ(encode(sys, disc, rod_example()).num_binaries(), 0u);
  const Formula f = f_atom(1, 2.5, 50, 100, 300);  // steps 2..5
  EXPECT_EQ(window_steps(time_instants(sys, disc), 1, 2.5).size(), 4u);
  EXPECT_EQ(encode(sys, disc, f).num_binaries(), 4u);
  const Formula mixed = Formula::disj(Formula::conj(g_atom(0, 1, 0, 50, 290), g_atom(2, 3, 50, 100, 290)), f);
  EXPECT_EQ(encode(sys, disc, mixed).num_binaries(), 4u + 2u);
}

TEST(Encode, OneHotRowsAndFiniteBounds) {
  const PdeSystem sys = heat_rod();
  const Discretization disc{4, 10};
  const Formula f = Formula::disj(f_atom(1, 2.5, 50, 100, 300), g_atom(0, 5, 100, 100, 350, Cmp::LT));
  const MilpModel m = encode(sys, disc, f);
  std::size_t one_hot = 0;
  for (const auto& row : m.rows) {
    if (row.role != RowRole::OneHot) continue;
    ++one_hot;
    EXPECT_EQ(row.sense, lp::Sense::Equal);
    EXPECT_EQ(row.rhs, 1.0);
  }
  EXPECT_EQ(one_hot, m.groups.size());
  for (const auto& v : m.vars) {
    EXPECT_TRUE(std::isfinite(v.lo)) << v.name;
    EXPECT_TRUE(std::isfinite(v.hi)) << v.name;
  }
  EXPECT_TRUE(m.find("q_0"));
  EXPECT_TRUE(m.find("u_10_4"));
  EXPECT_TRUE(m.find("z_1_2"));
}

TEST(Encode, DynamicsRowsReproduceSimulation) {
  for (PdeKind kind : {PdeKind::Heat, PdeKind::Wave}) {
    const PdeSystem sys = kind == PdeKind::Heat ? heat_rod() : wave_rod();
    const Discretization disc{5, 6};
    const MilpModel m = encode(sys, disc, Formula::atom(make_atom(TemporalOp::G, 0, sys.tmax, 0, sys.length, Cmp::GT, 0, sys.g0 - 1)));
    Rng rng(kind == PdeKind::Heat ? 1 : 2);
    ControlTrajectory c{{}, sys.q_max};
    for (std::size_t k = 0; k < disc.nt; ++k) c.values.push_back(rng.uniform(-1, 1) * sys.q_max);
    const Trajectory t = simulate(sys, disc, c);
    std::vector<double> x(m.vars.size(), 0.0);
    for (std::size_t k = 0; k < disc.nt; ++k) x[m.q_vars[k]] = c.values[k];
    for (std::size_t s = 0; s < m.u_vars.size(); ++s) x[m.u_vars[s]] = t.u[s];
    if (kind == PdeKind::Wave) {
      const double dt = disc.dt(sys);
      for (std::size_t s = disc.nx + 1; s < m.v_vars.size(); ++s) x[m.v_vars[s]] = (t.u[s] - t.u[s - disc.nx - 1]) / dt;
    }
    for (const auto& row : m.rows) {
      if (row.role != RowRole::Dynamics) continue;
      double lhs = 0, scale = 0;
      for (const auto& [j, coef] : row.terms) {
        lhs += coef * x[j];
        scale = std::max(scale, std::fabs(coef * x[j]));
      }
      EXPECT_NEAR(lhs, row.rhs, 1e-9 * std::max(1.0, scale)) << row.name;
    }
  }
}

TEST(LpFile, RoundTripIsByteIdentical) {
  const PdeSystem sys = heat_rod();
  const Discretization disc{4, 10};
  const Formula f = Formula::disj(f_atom(1, 2.5, 50, 100, 300), g_atom(0, 5, 100, 100, 350, Cmp::LT));
  const std::string text = write_lp(encode(sys, disc, f));
  EXPECT_NE(text.find("Binaries\n z_1_2\n"), std::string::npos);
  const MilpModel back = read_lp(text);
  EXPECT_EQ(back.num_binaries(), encode(sys, disc, f).num_binaries());
  EXPECT_EQ(write_lp(back), text);
}

TEST(LpFile, NoBinariesSectionWithoutBinaries) {
  const std::string text = write_lp(encode(heat_rod(), {4, 10}, rod_example()));
  EXPECT_EQ(text.find("Binaries"), std::string::npos);
  EXPECT_EQ(text.rfind("End\n"), text.size() - 4);
}

TEST(LpFile, ReaderRejectsBrokenText) {
  EXPECT_THROW(read_lp("x + y <= 1\nEnd\n"), SyntaxError);
  EXPECT_THROW(read_lp("Maximize\n obj: x\nSubject To\n c: x <= 1\n"), SyntaxError);
  EXPECT_THROW(read_lp("Maximize\n obj: x\nSubject To\n c: x <= \nEnd\n"), SyntaxError);
}

TEST(LpFile, GoldenRodExample) {
  const std::string text = write_lp(encode(heat_rod(), {4, 10}, rod_example()));
  const std::filesystem::path golden = std::filesystem::path(STLPDE_GOLDEN_DIR) / "rod_nx4_nt10.lp";
  std::ifstream in(golden);
  ASSERT_TRUE(in) << "missing golden file " << golden;
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(text, ss.str());
  EXPECT_EQ(write_lp(encode(heat_rod(), {4, 10}, rod_example())), text);
}

TEST(Builtin, LpCountsFollowTheChoiceGroups) {
  const PdeSystem sys = heat_rod();
  const Discretization disc{4, 10};
  const auto g_only = solve_builtin(encode(sys, disc, rod_example()));
  EXPECT_EQ(g_only.lps_solved, 1u);
  const Formula f = Formula::disj(f_atom(1, 2, 50, 100, 300), g_atom(0, 5, 100, 100, 350, Cmp::LT));
  ASSERT_EQ(window_steps(time_instants(sys, disc), 1, 2).size(), 3u);
  const auto out = solve_builtin(encode(sys, disc, f));
  EXPECT_EQ(out.lps_solved, 6u);
  EXPECT_EQ(out.status, SolveStatus::Optimal);
}

TEST(Builtin, ComboLimitExceeded) {
  const PdeSystem sys = heat_rod();
  const Discretization disc{4, 20};
  const Formula f = Formula::disj(f_atom(0, 5, 50, 100, 300), f_atom(0, 5, 0, 50, 300));
  BuiltinOptions opt;
  opt.combo_limit = 100;
  EXPECT_THROW(solve_builtin(encode(sys, disc, f), opt), ComboLimitExceeded);
  opt.combo_limit = 2 * 21 * 21;
  EXPECT_NO_THROW(solve_builtin(encode(sys, disc, f), opt));
}

TEST(Builtin, WindowAtTimeZeroGivesInitialMargin) {
  const PdeSystem sys = heat_rod();
  const auto out = solve_builtin(encode(sys, {4, 10}, g_atom(0, 0, 40, 60, 290)));
  ASSERT_EQ(out.status, SolveStatus::Optimal);
  EXPECT_NEAR(out.objective, 10.0, 1e-9);
}

TEST(Builtin, RodExampleIsSatisfied) {
  const auto out = solve_builtin(encode(heat_rod(), {8, 20}, rod_example()));
  ASSERT_EQ(out.status, SolveStatus::Optimal);
  EXPECT_GT(out.objective, 0);
  EXPECT_TRUE(consistent(out.objective, eval_robustness(rod_example(), out.trajectory)));
  EXPECT_TRUE(out.control.within_bounds(1e-9));
}

TEST(Builtin, CondensedAgreesWithFullLpPerAssignment) {
  const PdeSystem sys = heat_rod();
  const Discretization disc{4, 6};
  Rng rng(41);
  for (int n = 0; n < 8; ++n) {
    const Formula f = random_formula(rng, sys.length, sys.tmax, disc.nx, disc.nt, 3, 300, 20);
    const MilpModel m = encode(sys, disc, f);
    if (m.combinations() > 60) continue;
    double best = -lp::kInf;
    std::vector<std::size_t> choice(m.groups.size(), 0);
    while (true) {
      const auto sol = solve_full_lp(m, choice);
      if (sol.status == lp::Status::Optimal) best = std::max(best, sol.objective);
      std::size_t g = choice.size();
      while (g-- > 0) {
        if (++choice[g] < m.groups[g].binaries.size()) break;
        choice[g] = 0;
      }
      if (g == static_cast<std::size_t>(-1)) break;
    }
    const auto out = solve_builtin(m);
    ASSERT_EQ(out.status, SolveStatus::Optimal);
    EXPECT_NEAR(out.objective, best, 1e-6 * std::max(1.0, std::fabs(best))) << print_math(f);
  }
}

TEST(Builtin, DroppingAnEpigraphRowNeverLowersTheOptimum) {
  const PdeSystem sys = heat_rod();
  const Discretization disc{4, 5};
  const MilpModel m = encode(sys, disc, rod_example());
  const double base = solve_full_lp(m, {}).objective;
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < m.rows.size(); ++r) {
    if (m.rows[r].role != RowRole::Epigraph) continue;
    const auto sol = solve_full_lp(m, {}, {r});
    ASSERT_EQ(sol.status, lp::Status::Optimal);
    EXPECT_GE(sol.objective, base - 1e-7) << m.rows[r].name;
    ++dropped;
  }
  EXPECT_GT(dropped, 0u);
}

TEST(Builtin, DominatesBruteForceControlGrid) {
  Rng rng(77);
  for (int n = 0; n < 12; ++n) {
    const bool wave = n % 3 == 2;
    const PdeSystem sys = wave ? wave_rod() : heat_rod();
    const Discretization disc{4, 3};
    const double mid = wave ? 0.0 : 300.0, spread = wave ? 2.0 : 20.0;
    const Formula f = random_formula(rng, sys.length, sys.tmax, disc.nx, disc.nt, 3, mid, spread);
    const auto out = solve_builtin(encode(sys, disc, f));
    ASSERT_EQ(out.status, SolveStatus::Optimal);
    EXPECT_TRUE(consistent(out.objective, oracle_robustness(f, out.trajectory)));
    EXPECT_GE(out.objective, control_grid_best(sys, disc, f) - 1e-6) << print_math(f);
  }
}

TEST(Builtin, WorkBudgetKeepsTheIncumbent) {
  const PdeSystem sys = heat_rod();
  const Discretization disc{4, 10};
  const Formula f = Formula::disj(f_atom(1, 3, 50, 100, 300), f_atom(2, 4, 0, 50, 300));
  BuiltinOptions opt;
  opt.work_budget = 1;
  const auto out = solve_builtin(encode(sys, disc, f), opt);
  EXPECT_EQ(out.status, SolveStatus::TimedOut);
  EXPECT_EQ(out.lps_solved, 1u);
  EXPECT_TRUE(out.has_solution);
  EXPECT_LE(out.objective, solve_builtin(encode(sys, disc, f)).objective + 1e-9);
}

TEST(External, MissingBinaryIsSolverFailed) {
  SolverConfig cfg;
  cfg.kind = SolverConfig::Kind::External;
  cfg.external.command = "/nonexistent/solver-binary {lp} {sol}";
  try {
    solve(encode(heat_rod(), {4, 5}, rod_example()), cfg);
    FAIL() << "expected SolverFailed";
  } catch (const SolverFailed& e) {
    EXPECT_NE(std::string(e.what()).find("not found"), std::string::npos) << e.what();
  }
}

TEST(External, CommandNeedsPlaceholders) {
  SolverConfig cfg;
  cfg.kind = SolverConfig::Kind::External;
  cfg.external.command = "true";
  EXPECT_THROW(solve(encode(heat_rod(), {4, 5}, rod_example()), cfg), ConfigError);
}

TEST(External, AgreesWithBuiltin) {
  if (!scipy_available()) GTEST_SKIP() << "python3 with scipy not available";
  const PdeSystem sys = heat_rod();
  const std::vector<Formula> cases{
      g_atom(2, 5, 50, 100, 301),
      Formula::disj(f_atom(1, 2, 50, 100, 300), g_atom(0, 5, 100, 100, 350, Cmp::LT)),
      g_atom(0, 0, 40, 60, 290),
  };
  for (const auto& f : cases) {
    const MilpModel m = encode(sys, {4, 5}, f);
    const auto ext = solve(m, external_config());
    const auto in = solve_builtin(m);
    ASSERT_EQ(ext.status, SolveStatus::Optimal) << ext.message;
    EXPECT_NEAR(ext.objective, in.objective, 1e-6 * std::max(1.0, std::fabs(in.objective))) << print_math(f);
  }
}

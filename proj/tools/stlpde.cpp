// Command-line front end: solve, simulate, reason, baseline, datagen, iou,
// eval, prefdata and export-plot. Exit codes: 0 success, 2 bad input,
// 3 solver or runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stlpde/stlpde.hpp"

namespace fs = std::filesystem;
using namespace stlpde;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitSolver = 3;

struct GlobalOptions {
  std::string solver = "builtin";
  std::string solver_cmd;
  double budget_s = 600.0;
  double subgoal_budget_s = 120.0;
  std::size_t work_budget = 0;  // 0: unlimited
  std::size_t subgoal_work_budget = 0;
  std::size_t combo_limit = 10000;
  std::size_t nx = 0;  // 0: keep the problem's grid
  std::size_t nt = 0;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string out = "out";
  std::string config;
};

/// Fills options the user did not pass on the command line from a JSON
/// config whose keys are the long flag names.
void apply_config(CLI::App& app, GlobalOptions& g) {
  if (g.config.empty()) return;
  const Json cfg = parse_json(read_text(g.config), g.config);
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = nullptr;
    try {
      opt = app.get_option("--" + key);
    } catch (const CLI::OptionNotFound&) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    const std::string text = value.is_string() ? value.get<std::string>() : value.dump();
    opt->clear();
    try {
      opt->add_result(text);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
}

SolverConfig solver_config(const GlobalOptions& g, double budget_s, std::size_t work) {
  SolverConfig cfg;
  if (g.solver == "builtin") cfg.kind = SolverConfig::Kind::Builtin;
  else if (g.solver == "external") cfg.kind = SolverConfig::Kind::External;
  else throw ConfigError("--solver must be 'builtin' or 'external'");
  cfg.builtin.combo_limit = g.combo_limit;
  cfg.builtin.time_budget_s = budget_s;
  if (work > 0) cfg.builtin.work_budget = work;
  cfg.external.command = solver_command(g.solver_cmd);
  cfg.external.time_budget_s = budget_s;
  if (cfg.kind == SolverConfig::Kind::External && cfg.external.command.empty())
    throw ConfigError("external solver selected but neither --solver-cmd nor STLPDE_SOLVER is set");
  return cfg;
}

ReasoningConfig reasoning_config(const GlobalOptions& g) {
  ReasoningConfig cfg;
  cfg.anchor = solver_config(g, g.budget_s, g.work_budget);
  cfg.subgoal = solver_config(g, g.subgoal_budget_s, g.subgoal_work_budget);
  cfg.jobs = g.jobs;
  return cfg;
}

Problem load(const std::string& path, const GlobalOptions& g) {
  Problem p = load_problem(path);
  if (g.nx > 0) p.disc.nx = g.nx;
  if (g.nt > 0) p.disc.nt = g.nt;
  p.disc.check();
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Json outcome_json(const SolveOutcome& o) {
  Json j;
  j["status"] = to_string(o.status);
  j["r"] = o.has_solution ? Json(o.robustness) : Json(nullptr);
  j["objective"] = o.has_solution ? Json(o.objective) : Json(nullptr);
  j["gap"] = o.gap ? Json(*o.gap) : Json(nullptr);
  j["lps_solved"] = o.lps_solved;
  j["pivots"] = o.pivots;
  if (!o.message.empty()) j["message"] = o.message;
  return j;
}

/// Reads "t,q" rows; the header line is optional.
ControlTrajectory read_control_csv(const std::string& path, double q_max) {
  std::istringstream in(read_text(path));
  std::string line;
  ControlTrajectory ctrl{{}, q_max};
  while (std::getline(in, line)) {
    if (line.empty() || line.rfind("t,", 0) == 0) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError(path + ": expected 't,q' rows");
    try {
      ctrl.values.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception&) {
      throw ConfigError(path + ": bad number in '" + line + "'");
    }
  }
  return ctrl;
}


int cmd_solve(const GlobalOptions& g, const std::string& path) {
  const Problem p = load(path, g);
  const auto t0 = std::chrono::steady_clock::now();
  const SolveOutcome o = solve_problem(p, solver_config(g, g.budget_s, g.work_budget));
  Json res = outcome_json(o);
  res["wall_time_s"] = seconds_since(t0);
  const fs::path dir = g.out;
  write_text(dir / "result.json", res.dump(2) + "\n");
  if (o.has_solution) {
    write_text(dir / "trajectory.csv", trajectory_csv(o.trajectory));
    write_text(dir / "control.csv", control_csv(o.control, o.trajectory.ts));
  }
  std::cout << "status " << to_string(o.status);
  if (o.has_solution) std::cout << " r " << format_g9(o.robustness);
  std::cout << "\n";
  return o.status == SolveStatus::SolverFailed ? kExitSolver : 0;
}

int cmd_simulate(const GlobalOptions& g, const std::string& path, const std::string& control, double q_const) {
  const Problem p = load(path, g);
  ControlTrajectory ctrl = control.empty() ? ControlTrajectory{std::vector<double>(p.disc.nt, q_const), p.sys.q_max}
                                           : read_control_csv(control, p.sys.q_max);
  if (ctrl.values.size() != p.disc.nt)
    throw ConfigError("control has " + std::to_string(ctrl.values.size()) + " values, grid has " +
                      std::to_string(p.disc.nt) + " steps");
  const Trajectory traj = simulate(p.sys, p.disc, ctrl);
  const double r = eval_robustness(p.formula, traj);
  const fs::path dir = g.out;
  write_text(dir / "trajectory.csv", trajectory_csv(traj));
  write_text(dir / "result.json", Json{{"r", r}}.dump(2) + "\n");
  std::cout << "r " << format_g9(r) << "\n";
  return 0;
}

Json sample_json(const SampleRecord& s) {
  Json j{{"seed", s.seed}};
  if (s.result) {
    const ChainResult& c = *s.result;
    j["subgoal"] = formula_to_json(c.subgoal);
    j["subgoal_status"] = to_string(c.subgoal_status);
    j["anchor_status"] = to_string(c.anchor_status);
    j["t_s"] = c.t_s;
    j["r_direct"] = c.r_direct;
    j["r_chained"] = c.evaluated ? Json(c.r_chained) : Json(nullptr);
    j["delta_r"] = c.evaluated ? Json(c.r_chained - c.r_direct) : Json(nullptr);
    j["success"] = c.success;
  } else {
    j["error"] = s.error;
    j["error_kind"] = to_string(s.error_kind);
  }
  return j;
}

struct ReasonOutput {
  Json stats;
  std::vector<std::string> pairs;
};

/// Runs the baseline on one problem, writing stats.json, samples.jsonl and
/// (when `with_pairs`) pairs.jsonl into `dir`.
ReasonOutput reason_into(const GlobalOptions& g, const Problem& p, const fs::path& dir, std::size_t samples,
                         std::size_t cap, bool with_pairs, std::size_t jobs) {
  ReasoningConfig cfg = reasoning_config(g);
  cfg.jobs = jobs;
  const BaselineReport rep = run_baseline(p, samples, g.seed, cfg);
  Json stats = stats_to_json(rep.stats);
  stats["r_direct"] = rep.r_direct;
  stats["direct_status"] = to_string(rep.direct_status);
  std::string lines;
  for (const auto& s : rep.samples) lines += sample_json(s).dump() + "\n";
  write_text(dir / "samples.jsonl", lines);

  std::vector<std::string> pair_lines;
  if (with_pairs) {
    try {
      const std::string nl = render_nl(p.sys, p.formula);
      for (const auto& pair : build_preference_pairs(rep.samples, cap))
        pair_lines.push_back(pair_to_json(pair, nl, p.formula, g.seed).dump());
    } catch (const NoPairs& e) {
      stats["pairs_note"] = e.what();
    }
    stats["pairs"] = pair_lines.size();
    std::string text;
    for (const auto& l : pair_lines) text += l + "\n";
    write_text(dir / "pairs.jsonl", text);
  }
  write_text(dir / "stats.json", stats.dump(2) + "\n");
  return {stats, pair_lines};
}

int cmd_reason(const GlobalOptions& g, const std::string& path, std::size_t samples, std::size_t cap, bool pairs) {
  const Problem p = load(path, g);
  std::cout << reason_into(g, p, g.out, samples, cap, pairs, g.jobs).stats.dump() << "\n";
  return 0;
}

int cmd_prefdata(const GlobalOptions& g, const std::vector<std::string>& paths, std::size_t samples, std::size_t cap) {
  std::vector<std::string> files;
  for (const auto& p : paths) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".json") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  if (files.empty()) throw EmptyInput("no problem files");
  std::vector<Problem> problems;
  for (const auto& f : files) problems.push_back(load(f, g));

  // Problems fan out over the pool; the merged file is written once all finish.
  std::vector<std::vector<std::string>> per(files.size());
  std::vector<std::string> failures(files.size());
  parallel_for(files.size(), g.jobs, [&](std::size_t i) {
    const fs::path dir = fs::path(g.out) / fs::path(files[i]).stem();
    try {
      per[i] = reason_into(g, problems[i], dir, samples, cap, true, 1).pairs;
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  std::string merged;
  std::size_t count = 0;
  for (const auto& lines : per)
    for (const auto& l : lines) merged += l + "\n", ++count;
  write_text(fs::path(g.out) / "pairs.jsonl", merged);
  Json summary{{"problems", files.size()}, {"pairs", count}};
  Json failed = Json::object();
  for (std::size_t i = 0; i < files.size(); ++i)
    if (!failures[i].empty()) failed[files[i]] = failures[i];
  summary["failed"] = failed;
  write_text(fs::path(g.out) / "prefdata.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return failed.empty() ? 0 : kExitSolver;
}

int cmd_datagen(const GlobalOptions& g, const std::string& kind, std::size_t per_format, const std::string& split,
                const std::string& paraphrase_path) {
  std::vector<PdeKind> kinds;
  if (kind == "heat" || kind == "both") kinds.push_back(PdeKind::Heat);
  if (kind == "wave" || kind == "both") kinds.push_back(PdeKind::Wave);
  if (kinds.empty()) throw ConfigError("--kind must be heat, wave or both");
  Split sp;
  if (split == "train") sp = Split::Train;
  else if (split == "test") sp = Split::Test;
  else throw ConfigError("--split must be train or test");
  std::optional<ParaphraseMap> para;
  if (!paraphrase_path.empty()) para = load_paraphrases(paraphrase_path);
  const auto formats = enumerate_formats();
  Json summary = Json::object();
  for (PdeKind k : kinds) {
    const DatasetSummary s = emit_dataset(formats, per_format, k, sp, g.out, g.seed, para ? &*para : nullptr);
    summary[to_string(k)] = Json{{"records", s.records}, {"files", s.files}};
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

/// A formula file: a problem, a dataset record or a bare formula object.
/// Returns the formula (empty if it does not parse) and any system it carries.
std::pair<std::optional<Formula>, std::optional<PdeSystem>> read_formula_file(const std::string& path, bool strict) {
  const Json j = parse_json(read_text(path), path);
  std::optional<PdeSystem> sys;
  if (j.is_object() && j.contains("materials")) sys = system_from_json(j);
  else if (j.is_object() && j.contains("system")) sys = system_from_json(j["system"]);
  const Json& fj = j.is_object() && j.contains("stl") ? j["stl"] : j;
  try {
    return {formula_from_json(fj), sys};
  } catch (const Error&) {
    if (strict) throw;
  } catch (const Json::exception& e) {
    if (strict) throw ConfigError(path + ": " + e.what());
  }
  return {std::nullopt, sys};
}

int cmd_iou(const std::string& truth_path, const std::string& cand_path, const std::string& system_path) {
  auto [truth, truth_sys] = read_formula_file(truth_path, true);
  auto [cand, cand_sys] = read_formula_file(cand_path, false);
  std::optional<PdeSystem> sys;
  if (!system_path.empty()) sys = system_from_json(parse_json(read_text(system_path), system_path));
  else sys = truth_sys;
  if (!sys) throw ConfigError("no system: pass --system or use a truth file that carries one");
  const double score = iou(*truth, cand, *sys);
  std::cout << format_number(score) << "\n";
  return 0;
}

int cmd_eval(const GlobalOptions& g, const std::string& batch_path, const std::string& system_path) {
  std::optional<PdeSystem> fallback;
  if (!system_path.empty()) fallback = system_from_json(parse_json(read_text(system_path), system_path));
  std::istringstream in(read_text(batch_path));
  std::string line;
  std::vector<EvalRecord> batch;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      batch.push_back(eval_record_from_json(parse_json(line, batch_path + ":" + std::to_string(lineno))));
    } catch (const Json::exception& e) {
      throw ConfigError(batch_path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  const Json report = eval_report_to_json(evaluate(batch, fallback));
  write_text(fs::path(g.out) / "eval.json", report.dump(2) + "\n");
  std::cout << report["aggregate"].dump() << "\n";
  return 0;
}

/// Trajectory, control and one row per atom describing its window and the
/// profile end points, enough to redraw time-space panels.
int cmd_export_plot(const GlobalOptions& g, const std::string& path, const std::string& control) {
  const Problem p = load(path, g);
  ControlTrajectory ctrl;
  Json res;
  if (control.empty()) {
    const SolveOutcome o = solve_problem(p, solver_config(g, g.budget_s, g.work_budget));
    if (!o.has_solution) throw SolverFailed("no control to plot (" + std::string(to_string(o.status)) + ")");
    ctrl = o.control;
    res = outcome_json(o);
  } else {
    ctrl = read_control_csv(control, p.sys.q_max);
    if (ctrl.values.size() != p.disc.nt) throw ConfigError("control length does not match the grid");
  }
  const Trajectory traj = simulate(p.sys, p.disc, ctrl);
  res["r"] = eval_robustness(p.formula, traj);
  const fs::path dir = g.out;
  write_text(dir / "trajectory.csv", trajectory_csv(traj));
  write_text(dir / "control.csv", control_csv(ctrl, traj.ts));
  std::string atoms = "atom,op,cmp,t_lo,t_hi,x_lo,x_hi,mu_lo,mu_hi\n";
  const auto list = p.formula.atoms();
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& a = list[i];
    atoms += std::to_string(i) + "," + op_symbol(a.op) + "," + cmp_symbol(a.pred.cmp) + "," + format_g9(a.t_lo) + "," +
             format_g9(a.t_hi) + "," + format_g9(a.pred.x_lo) + "," + format_g9(a.pred.x_hi) + "," +
             format_g9(a.pred.profile(a.pred.x_lo)) + "," + format_g9(a.pred.profile(a.pred.x_hi)) + "\n";
  }
  write_text(dir / "atoms.csv", atoms);
  write_text(dir / "result.json", res.dump(2) + "\n");
  std::cout << "r " << format_g9(res["r"].get<double>()) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"STL-constrained PDE control: solving, subgoal reasoning, datasets and metrics"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--solver", g.solver, "builtin or external")->check(CLI::IsMember({"builtin", "external"}));
  app.add_option("--solver-cmd", g.solver_cmd, "external command template with {lp}, {sol}, {budget}");
  app.add_option("--budget-s", g.budget_s, "time budget of anchor solves in seconds");
  app.add_option("--subgoal-budget-s", g.subgoal_budget_s, "time budget of subgoal solves in seconds");
  app.add_option("--work-budget", g.work_budget, "simplex iteration budget of anchor solves (builtin, 0 = none)");
  app.add_option("--subgoal-work-budget", g.subgoal_work_budget, "simplex iteration budget of subgoal solves");
  app.add_option("--combo-limit", g.combo_limit, "largest binary assignment count the builtin solver enumerates");
  app.add_option("--nx", g.nx, "override the number of elements");
  app.add_option("--nt", g.nt, "override the number of time steps");
  app.add_option("--seed", g.seed, "seed for every sampling command");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory");
  app.add_option("--config", g.config, "JSON file of defaults keyed by long flag name");

  std::string problem, control, truth, cand, system_path, batch, kind = "heat", split = "train", paraphrases;
  std::vector<std::string> problems;
  double q_const = 0.0;
  std::size_t samples = 20, cap = 1000, per_format = 1;
  bool no_pairs = false;

  auto* solve_cmd = app.add_subcommand("solve", "solve a problem and write result.json, trajectory.csv, control.csv");
  solve_cmd->add_option("problem", problem, "problem JSON")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "simulate a control and report the robustness");
  sim_cmd->add_option("problem", problem, "problem JSON")->required();
  auto* sim_ctrl = sim_cmd->add_option("--control", control, "control CSV (t,q)");
  sim_cmd->add_option("--q", q_const, "constant control when no CSV is given")->excludes(sim_ctrl);

  auto* reason_cmd = app.add_subcommand("reason", "random subgoal sampling with preference pairs");
  reason_cmd->add_option("problem", problem, "problem JSON")->required();
  reason_cmd->add_option("--samples", samples, "number of subgoals")->check(CLI::PositiveNumber);
  reason_cmd->add_option("--max-pairs", cap, "cap on preference pairs");
  reason_cmd->add_flag("--no-pairs", no_pairs, "skip pairs.jsonl");

  auto* base_cmd = app.add_subcommand("baseline", "random subgoal sampling statistics only");
  base_cmd->add_option("problem", problem, "problem JSON")->required();
  base_cmd->add_option("--samples", samples, "number of subgoals")->check(CLI::PositiveNumber);

  auto* gen_cmd = app.add_subcommand("datagen", "write the synthetic NL/STL dataset");
  gen_cmd->add_option("--kind", kind, "heat, wave or both")->check(CLI::IsMember({"heat", "wave", "both"}));
  gen_cmd->add_option("--per-format", per_format, "records per syntax format")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  gen_cmd->add_option("--paraphrases", paraphrases, "JSON map from record seed to paraphrases");

  auto* iou_cmd = app.add_subcommand("iou", "IoU of two formulas' satisfying regions");
  iou_cmd->add_option("--truth", truth, "reference formula, problem or record JSON")->required();
  iou_cmd->add_option("--cand", cand, "candidate formula JSON")->required();
  iou_cmd->add_option("--system", system_path, "system JSON when the truth file has none");

  auto* eval_cmd = app.add_subcommand("eval", "score a JSONL batch of candidates");
  eval_cmd->add_option("batch", batch, "JSONL batch")->required();
  eval_cmd->add_option("--system", system_path, "system JSON for records without one");

  auto* pref_cmd = app.add_subcommand("prefdata", "preference pairs over many problems");
  pref_cmd->add_option("problems", problems, "problem files or directories")->required();
  pref_cmd->add_option("--samples", samples, "subgoals per problem")->check(CLI::PositiveNumber);
  pref_cmd->add_option("--max-pairs", cap, "cap on pairs per problem");

  auto* plot_cmd = app.add_subcommand("export-plot", "write plot data for a solved or given control");
  plot_cmd->add_option("problem", problem, "problem JSON")->required();
  plot_cmd->add_option("--control", control, "control CSV; solved when omitted");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    apply_config(app, g);
    if (*solve_cmd) return cmd_solve(g, problem);
    if (*sim_cmd) return cmd_simulate(g, problem, control, q_const);
    if (*reason_cmd) return cmd_reason(g, problem, samples, cap, !no_pairs);
    if (*base_cmd) return cmd_reason(g, problem, samples, cap, false);
    if (*gen_cmd) return cmd_datagen(g, kind, per_format, split, paraphrases);
    if (*iou_cmd) return cmd_iou(truth, cand, system_path);
    if (*eval_cmd) return cmd_eval(g, batch, system_path);
    if (*pref_cmd) return cmd_prefdata(g, problems, samples, cap);
    if (*plot_cmd) return cmd_export_plot(g, problem, control);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_input_error() ? kExitInput : kExitSolver;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolver;
  }
  return 0;
}

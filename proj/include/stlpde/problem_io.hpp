#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stlpde/errors.hpp"
#include "stlpde/fem.hpp"
#include "stlpde/semantics.hpp"
#include "stlpde/stl.hpp"
#include "stlpde/stl_parse.hpp"
#include "stlpde/system.hpp"
#include "stlpde/util.hpp"

namespace stlpde {

using Json = nlohmann::ordered_json;

/// A PDE system, its grid and the formula to maximize.
struct Problem {
  PdeSystem sys;
  Discretization disc;
  Formula formula;
};

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

namespace detail {

inline double number_field(const Json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  if (!j[key].is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
  return j[key].get<double>();
}

inline double number_or(const Json& j, const char* key, double fallback) {
  return j.contains(key) ? number_field(j, key) : fallback;
}

inline Cmp cmp_from(const std::string& s) {
  if (s == "<") return Cmp::LT;
  if (s == ">") return Cmp::GT;
  if (s == "=") return Cmp::EQ;
  throw SyntaxError("unknown comparison '" + s + "'");
}

}  // namespace detail

inline Json predicate_to_json(const LinearPredicate& p) {
  return Json{{"x_lo", p.x_lo}, {"x_hi", p.x_hi}, {"cmp", cmp_symbol(p.cmp)}, {"a", p.a}, {"b", p.b}};
}

/// Accepts the object form or the text form `[x1, x2], "<", a * x + b`.
inline LinearPredicate predicate_from_json(const Json& j) {
  if (j.is_string()) return parse_region(j.get<std::string>());
  if (!j.is_object()) throw ConfigError("region must be an object or a string");
  LinearPredicate p;
  p.x_lo = detail::number_field(j, "x_lo");
  p.x_hi = detail::number_field(j, "x_hi");
  if (!j.contains("cmp") || !j["cmp"].is_string()) throw ConfigError("region needs a string 'cmp'");
  p.cmp = detail::cmp_from(j["cmp"].get<std::string>());
  p.a = detail::number_field(j, "a");
  p.b = detail::number_field(j, "b");
  return p;
}

inline Json formula_to_json(const Formula& f) {
  const CspecText text = print_cspec(f);
  Json regions = Json::object();
  for (const auto& [label, pred] : text.regions) regions[label] = predicate_to_json(pred);
  return Json{{"regions", regions}, {"cspec", text.cspec}};
}

/// {"regions": {...}, "cspec": "..."} or {"math": "..."}; a bare string is read as math form.
inline Formula formula_from_json(const Json& j) {
  if (j.is_string()) return parse_mathform(j.get<std::string>());
  if (!j.is_object()) throw ConfigError("formula must be an object");
  if (j.contains("math")) return parse_mathform(j["math"].get<std::string>());
  if (!j.contains("regions") || !j.contains("cspec")) throw ConfigError("formula needs 'regions' and 'cspec'");
  if (!j["regions"].is_object()) throw ConfigError("'regions' must be an object");
  if (!j["cspec"].is_string()) throw ConfigError("'cspec' must be a string");
  RegionMap regions;
  for (const auto& [label, pred] : j["regions"].items()) regions[label] = predicate_from_json(pred);
  return parse_cspec(regions, j["cspec"].get<std::string>());
}

inline Json system_to_json(const PdeSystem& sys) {
  Json j;
  j["kind"] = to_string(sys.kind);
  j["L"] = sys.length;
  j["tmax"] = sys.tmax;
  j["g0"] = sys.g0;
  if (sys.u0.constant) j["u0"] = Json{{"const", *sys.u0.constant}};
  else j["u0"] = Json{{"nodes", sys.u0.nodes}};
  Json mats = Json::array();
  for (const auto& m : sys.materials) {
    Json mj{{"x_end", m.x_end}, {"rho", m.rho}};
    if (sys.kind == PdeKind::Heat) {
      mj["c"] = m.c;
      mj["kappa"] = m.kappa;
    } else {
      mj["E"] = m.E;
    }
    mats.push_back(mj);
  }
  j["materials"] = mats;
  j["q_max"] = sys.q_max;
  if (sys.u_lo) j["u_lo"] = *sys.u_lo;
  if (sys.u_hi) j["u_hi"] = *sys.u_hi;
  return j;
}

inline PdeSystem system_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("system must be an object");
  PdeSystem sys;
  const std::string kind = j.value("kind", std::string("heat"));
  if (kind == "heat") sys.kind = PdeKind::Heat;
  else if (kind == "wave") sys.kind = PdeKind::Wave;
  else throw ConfigError("kind must be 'heat' or 'wave'");
  sys.length = detail::number_field(j, "L");
  sys.tmax = detail::number_field(j, "tmax");
  sys.g0 = detail::number_or(j, "g0", sys.kind == PdeKind::Heat ? 300.0 : 0.0);
  if (j.contains("u0")) {
    const Json& u0 = j["u0"];
    if (u0.is_number()) sys.u0 = InitialProfile::uniform(u0.get<double>());
    else if (u0.is_object() && u0.contains("const")) sys.u0 = InitialProfile::uniform(detail::number_field(u0, "const"));
    else if (u0.is_object() && u0.contains("nodes") && u0["nodes"].is_array())
      sys.u0 = InitialProfile::sampled(u0["nodes"].get<std::vector<double>>());
    else throw ConfigError("u0 must be a number, {\"const\": v} or {\"nodes\": [...]}");
  } else {
    sys.u0 = InitialProfile::uniform(sys.g0);
  }
  if (!j.contains("materials") || !j["materials"].is_array()) throw ConfigError("missing 'materials' array");
  for (const auto& mj : j["materials"]) {
    Material m;
    m.x_end = detail::number_field(mj, "x_end");
    m.rho = detail::number_field(mj, "rho");
    if (sys.kind == PdeKind::Heat) {
      m.c = detail::number_field(mj, "c");
      m.kappa = detail::number_field(mj, "kappa");
    } else {
      m.E = detail::number_field(mj, "E");
    }
    sys.materials.push_back(m);
  }
  sys.q_max = detail::number_or(j, "q_max", sys.kind == PdeKind::Heat ? kDefaultHeatControlBound : kDefaultWaveControlBound);
  if (j.contains("u_lo")) sys.u_lo = detail::number_field(j, "u_lo");
  if (j.contains("u_hi")) sys.u_hi = detail::number_field(j, "u_hi");
  sys.check();
  return sys;
}

inline Json problem_to_json(const Problem& p) {
  Json j = system_to_json(p.sys);
  j["grid"] = Json{{"nx", p.disc.nx}, {"nt", p.disc.nt}};
  if (p.disc.mass == MassMatrix::Lumped) j["mass"] = "lumped";
  j["stl"] = formula_to_json(p.formula);
  return j;
}

inline Problem problem_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("problem must be a JSON object");
  PdeSystem sys = system_from_json(j);
  Discretization disc;
  if (j.contains("grid")) {
    const Json& g = j["grid"];
    if (g.contains("nx")) disc.nx = g["nx"].get<std::size_t>();
    if (g.contains("nt")) disc.nt = g["nt"].get<std::size_t>();
  }
  if (j.contains("mass")) {
    const std::string mass = j["mass"].get<std::string>();
    if (mass == "lumped") disc.mass = MassMatrix::Lumped;
    else if (mass != "consistent") throw ConfigError("mass must be 'consistent' or 'lumped'");
  }
  disc.check();
  if (!j.contains("stl")) throw ConfigError("problem needs an 'stl' formula");
  Formula f = formula_from_json(j["stl"]);
  const auto report = validate(f, sys);
  if (!report.valid) throw DomainMismatch(report.issues.front());
  return {sys, disc, f};
}

inline Problem load_problem(const std::filesystem::path& path) {
  try {
    return problem_from_json(parse_json(read_text(path), path.string()));
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

/// Rows "t,x,u" in step-major order.
inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t,x,u\n";
  for (std::size_t k = 0; k < traj.steps(); ++k)
    for (std::size_t i = 0; i < traj.nodes(); ++i)
      out += format_g9(traj.ts[k]) + "," + format_g9(traj.xs[i]) + "," + format_g9(traj.at(k, i)) + "\n";
  return out;
}

/// Rows "t,q" where q acts over [t, t + dt).
inline std::string control_csv(const ControlTrajectory& ctrl, std::span<const double> ts) {
  std::string out = "t,q\n";
  for (std::size_t k = 0; k < ctrl.values.size(); ++k) out += format_g9(ts[k]) + "," + format_g9(ctrl.values[k]) + "\n";
  return out;
}

}  // namespace stlpde

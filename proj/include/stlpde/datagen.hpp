#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <string>
#include <vector>

#include "stlpde/errors.hpp"
#include "stlpde/problem_io.hpp"
#include "stlpde/stl.hpp"
#include "stlpde/stl_parse.hpp"
#include "stlpde/system.hpp"
#include "stlpde/util.hpp"

namespace stlpde {

/// Tree shapes for one to three atoms; three-atom chains associate left.
enum class Structure { Single, And, Or, OrOr, AndAnd, OrThenAnd, OrOfAnd, AndThenOr, AndOfOr };

inline const char* structure_id(Structure s) {
  switch (s) {
    case Structure::Single: return "single";
    case Structure::And: return "and";
    case Structure::Or: return "or";
    case Structure::OrOr: return "or_or";
    case Structure::AndAnd: return "and_and";
    case Structure::OrThenAnd: return "orp_and";
    case Structure::OrOfAnd: return "or_andp";
    case Structure::AndThenOr: return "andp_or";
    case Structure::AndOfOr: return "and_orp";
  }
  return "?";
}

inline std::size_t arity(Structure s) {
  switch (s) {
    case Structure::Single: return 1;
    case Structure::And:
    case Structure::Or: return 2;
    default: return 3;
  }
}

struct AtomSpec {
  TemporalOp op = TemporalOp::G;
  Cmp cmp = Cmp::LT;

  bool operator==(const AtomSpec&) const = default;
};

struct SyntaxFormat {
  Structure structure = Structure::Single;
  std::vector<AtomSpec> atoms;

  /// e.g. "orp_and-Glt-Fgt-Geq"
  std::string id() const {
    std::string s = structure_id(structure);
    for (const auto& a : atoms) {
      s += '-';
      s += op_symbol(a.op);
      s += a.cmp == Cmp::LT ? "lt" : a.cmp == Cmp::GT ? "gt" : "eq";
    }
    return s;
  }

  bool operator==(const SyntaxFormat&) const = default;
};

inline Formula build_formula(Structure s, const std::vector<Formula>& a) {
  if (a.size() != arity(s)) throw ConfigError("atom count does not match the structure");
  switch (s) {
    case Structure::Single: return a[0];
    case Structure::And: return Formula::conj(a[0], a[1]);
    case Structure::Or: return Formula::disj(a[0], a[1]);
    case Structure::OrOr: return Formula::disj(Formula::disj(a[0], a[1]), a[2]);
    case Structure::AndAnd: return Formula::conj(Formula::conj(a[0], a[1]), a[2]);
    case Structure::OrThenAnd: return Formula::conj(Formula::disj(a[0], a[1]), a[2]);
    case Structure::OrOfAnd: return Formula::disj(a[0], Formula::conj(a[1], a[2]));
    case Structure::AndThenOr: return Formula::disj(Formula::conj(a[0], a[1]), a[2]);
    case Structure::AndOfOr: return Formula::conj(a[0], Formula::disj(a[1], a[2]));
  }
  return a[0];
}

/// Structure of a formula built by build_formula(), if it is one of the nine shapes.
inline std::optional<Structure> structure_of(const Formula& f) {
  using K = Formula::Kind;
  if (f.is_atom()) return Structure::Single;
  const bool l = f.lhs().is_atom(), r = f.rhs().is_atom();
  if (l && r) return f.kind() == K::And ? Structure::And : Structure::Or;
  if (!l && r && f.lhs().lhs().is_atom() && f.lhs().rhs().is_atom()) {
    const K in = f.lhs().kind();
    if (f.kind() == K::Or) return in == K::Or ? Structure::OrOr : Structure::AndThenOr;
    return in == K::And ? Structure::AndAnd : Structure::OrThenAnd;
  }
  if (l && !r && f.rhs().lhs().is_atom() && f.rhs().rhs().is_atom()) {
    const K in = f.rhs().kind();
    if (f.kind() == K::Or && in == K::And) return Structure::OrOfAnd;
    if (f.kind() == K::And && in == K::Or) return Structure::AndOfOr;
  }
  return std::nullopt;
}

inline const std::vector<AtomSpec>& atom_specs() {
  static const std::vector<AtomSpec> specs = {{TemporalOp::G, Cmp::LT}, {TemporalOp::G, Cmp::GT}, {TemporalOp::G, Cmp::EQ},
                                              {TemporalOp::F, Cmp::LT}, {TemporalOp::F, Cmp::GT}, {TemporalOp::F, Cmp::EQ}};
  return specs;
}

/// Every syntax format with one, two or three atoms: structure outermost,
/// then atom specs left to right.
inline std::vector<SyntaxFormat> enumerate_formats() {
  std::vector<SyntaxFormat> out;
  const auto& specs = atom_specs();
  for (const auto& a : specs) out.push_back({Structure::Single, {a}});
  for (Structure s : {Structure::And, Structure::Or})
    for (const auto& a : specs)
      for (const auto& b : specs) out.push_back({s, {a, b}});
  for (Structure s : {Structure::OrOr, Structure::AndAnd, Structure::OrThenAnd, Structure::OrOfAnd,
                      Structure::AndThenOr, Structure::AndOfOr})
    for (const auto& a : specs)
      for (const auto& b : specs)
        for (const auto& c : specs) out.push_back({s, {a, b, c}});
  return out;
}

/// Records in the full-scale heat training split: per-format multiplicities
/// 640, 636 and 631 for one, two and three atoms.
inline std::uint64_t full_scale_count(std::uint64_t m1 = 640, std::uint64_t m2 = 636, std::uint64_t m3 = 631) {
  return m1 * 6 + m2 * 72 + m3 * 1296;
}

/// Sampling ranges for one PDE kind. Heat intercepts are drawn around the
/// boundary temperature; wave intercepts from [b_lo, b_hi].
struct SamplingRanges {
  double length_lo = 0, length_hi = 0;
  double tmax_lo = 0, tmax_hi = 0;
  double a_lo = 0, a_hi = 0;
  double temp_lo = 0, temp_hi = 0;
  double b_offset = 0;
  double b_lo = 0, b_hi = 0;
  double rho_a_lo = 0, rho_a_hi = 0, rho_b_lo = 0, rho_b_hi = 0;
  double c_a_lo = 0, c_a_hi = 0, c_b_lo = 0, c_b_hi = 0;
  double kappa_a_lo = 0, kappa_a_hi = 0, kappa_b_lo = 0, kappa_b_hi = 0;
  double e_a_lo = 0, e_a_hi = 0, e_b_lo = 0, e_b_hi = 0;
};

inline const SamplingRanges& heat_ranges() {
  static const SamplingRanges r{.length_lo = 50, .length_hi = 300,
                                .tmax_lo = 5, .tmax_hi = 15,
                                .a_lo = -0.5, .a_hi = 0.5,
                                .temp_lo = 250, .temp_hi = 350,
                                .b_offset = 20,
                                .rho_a_lo = 3e-6, .rho_a_hi = 6e-6, .rho_b_lo = 3e-6, .rho_b_hi = 6e-6,
                                .c_a_lo = 3e8, .c_a_hi = 4.5e8, .c_b_lo = 4.5e8, .c_b_hi = 4.8e8,
                                .kappa_a_lo = 1.2e6, .kappa_a_hi = 1.8e6, .kappa_b_lo = 0.4e6, .kappa_b_hi = 1.2e6};
  return r;
}

// segment a is steel, segment b is brass
inline const SamplingRanges& wave_ranges() {
  static const SamplingRanges r{.length_lo = 60000, .length_hi = 140000,
                                .tmax_lo = 0.5, .tmax_hi = 2,
                                .a_lo = -5e-5, .a_hi = 5e-5,
                                .b_lo = -3, .b_hi = 3,
                                .rho_a_lo = 7.6e-6, .rho_a_hi = 8e-6, .rho_b_lo = 8.4e-6, .rho_b_hi = 8.8e-6,
                                .e_a_lo = 2e8, .e_a_hi = 2.4e8, .e_b_lo = 1e8, .e_b_hi = 1.8e8};
  return r;
}

inline const SamplingRanges& ranges_for(PdeKind kind) { return kind == PdeKind::Heat ? heat_ranges() : wave_ranges(); }

struct ProblemInstance {
  PdeSystem sys;
  Formula formula;
  SyntaxFormat format;
  std::uint64_t seed = 0;
};

/// Draws a system from the kind's ranges and one atom per format slot.
/// Times keep 2 (heat) or 3 (wave) decimals, positions are whole mm,
/// constants keep 4 significant digits.
inline ProblemInstance sample_instance(const SyntaxFormat& fmt, PdeKind kind, std::uint64_t seed) {
  const SamplingRanges& R = ranges_for(kind);
  Rng rng(seed);
  auto sig = [&](double lo, double hi) { return quantize_sig(rng.uniform(lo, hi), 4, lo, hi); };
  const int t_dec = kind == PdeKind::Heat ? 2 : 3;

  PdeSystem sys;
  sys.kind = kind;
  sys.length = quantize(rng.uniform(R.length_lo, R.length_hi), 0, R.length_lo, R.length_hi);
  sys.tmax = quantize(rng.uniform(R.tmax_lo, R.tmax_hi), t_dec, R.tmax_lo, R.tmax_hi);
  Material ma, mb;
  ma.x_end = sys.length / 2.0;
  mb.x_end = sys.length;
  if (kind == PdeKind::Heat) {
    sys.g0 = sig(R.temp_lo, R.temp_hi);
    sys.u0 = InitialProfile::uniform(sys.g0);
    ma.rho = sig(R.rho_a_lo, R.rho_a_hi);
    mb.rho = sig(R.rho_b_lo, R.rho_b_hi);
    ma.c = sig(R.c_a_lo, R.c_a_hi);
    mb.c = sig(R.c_b_lo, R.c_b_hi);
    ma.kappa = sig(R.kappa_a_lo, R.kappa_a_hi);
    mb.kappa = sig(R.kappa_b_lo, R.kappa_b_hi);
    sys.q_max = kDefaultHeatControlBound;
  } else {
    sys.g0 = 0.0;
    sys.u0 = InitialProfile::uniform(0.0);
    ma.rho = sig(R.rho_a_lo, R.rho_a_hi);
    mb.rho = sig(R.rho_b_lo, R.rho_b_hi);
    ma.E = sig(R.e_a_lo, R.e_a_hi);
    mb.E = sig(R.e_b_lo, R.e_b_hi);
    sys.q_max = kDefaultWaveControlBound;
  }
  sys.materials = {ma, mb};

  auto interval = [&](double range, int decimals, double& lo, double& hi) {
    const double start = rng.uniform(0.0, 0.8 * range);
    const double width = rng.uniform(0.05, 0.4) * range;
    lo = quantize(start, decimals, 0.0, range);
    hi = std::max(lo, quantize(std::min(start + width, range), decimals, 0.0, range));
  };

  std::vector<Formula> atoms;
  for (const auto& spec : fmt.atoms) {
    TemporalAtom a;
    a.op = spec.op;
    a.pred.cmp = spec.cmp;
    interval(sys.tmax, t_dec, a.t_lo, a.t_hi);
    interval(sys.length, 0, a.pred.x_lo, a.pred.x_hi);
    if (kind == PdeKind::Heat) {
      a.pred.a = quantize(rng.uniform(R.a_lo, R.a_hi), 4, R.a_lo, R.a_hi);
      a.pred.b = quantize(sys.g0 + rng.uniform(-R.b_offset, R.b_offset), 4, sys.g0 - R.b_offset, sys.g0 + R.b_offset);
    } else {
      a.pred.a = quantize_sig(rng.uniform(R.a_lo, R.a_hi), 4, R.a_lo, R.a_hi);
      a.pred.b = quantize(rng.uniform(R.b_lo, R.b_hi), 4, R.b_lo, R.b_hi);
    }
    atoms.push_back(Formula::atom(a));
  }
  return {sys, build_formula(fmt.structure, atoms), fmt, seed};
}

/// Range violations of a sampled instance; empty when everything is in range.
inline std::vector<std::string> range_violations(const PdeSystem& sys, const Formula& f) {
  const SamplingRanges& R = ranges_for(sys.kind);
  std::vector<std::string> bad;
  auto check = [&](const std::string& what, double v, double lo, double hi) {
    if (!(v >= lo && v <= hi)) bad.push_back(what + "=" + format_number(v) + " outside [" + format_number(lo) + ", " + format_number(hi) + "]");
  };
  check("L", sys.length, R.length_lo, R.length_hi);
  check("tmax", sys.tmax, R.tmax_lo, R.tmax_hi);
  if (sys.materials.size() != 2) bad.push_back("expected two material segments");
  else {
    const Material& ma = sys.materials[0];
    const Material& mb = sys.materials[1];
    check("rho_a", ma.rho, R.rho_a_lo, R.rho_a_hi);
    check("rho_b", mb.rho, R.rho_b_lo, R.rho_b_hi);
    if (sys.kind == PdeKind::Heat) {
      check("c_a", ma.c, R.c_a_lo, R.c_a_hi);
      check("c_b", mb.c, R.c_b_lo, R.c_b_hi);
      check("kappa_a", ma.kappa, R.kappa_a_lo, R.kappa_a_hi);
      check("kappa_b", mb.kappa, R.kappa_b_lo, R.kappa_b_hi);
    } else {
      check("E_a", ma.E, R.e_a_lo, R.e_a_hi);
      check("E_b", mb.E, R.e_b_lo, R.e_b_hi);
    }
  }
  if (sys.kind == PdeKind::Heat) check("temp", sys.g0, R.temp_lo, R.temp_hi);
  for (const auto& a : f.atoms()) {
    check("a", a.pred.a, R.a_lo, R.a_hi);
    if (sys.kind == PdeKind::Heat) check("b", a.pred.b, sys.g0 - R.b_offset, sys.g0 + R.b_offset);
    else check("b", a.pred.b, R.b_lo, R.b_hi);
    check("t_lo", a.t_lo, 0.0, sys.tmax);
    check("t_hi", a.t_hi, a.t_lo, sys.tmax);
    check("x_lo", a.pred.x_lo, 0.0, sys.length);
    check("x_hi", a.pred.x_hi, a.pred.x_lo, sys.length);
  }
  return bad;
}

namespace detail {

inline const char* compare_phrase(PdeKind kind, Cmp cmp) {
  if (kind == PdeKind::Heat) return cmp == Cmp::GT ? "larger than" : cmp == Cmp::LT ? "lower than" : "the same as";
  return cmp == Cmp::GT ? "stretched over" : cmp == Cmp::LT ? "compressed below" : "equal to";
}

inline std::string atom_clause(PdeKind kind, const TemporalAtom& a, std::size_t index) {
  std::string s = a.op == TemporalOp::F ? "for one point during the time interval " : "for all time between the time interval ";
  s += format_number(a.t_lo) + " and " + format_number(a.t_hi) + ", ";
  s += kind == PdeKind::Heat ? "the temperature distribution of the rod should be " : "the displacement of the rod should be ";
  s += compare_phrase(kind, a.pred.cmp);
  s += " the linear profile mu" + std::to_string(index) + "(x) = " + profile_text(a.pred.a, a.pred.b);
  s += " between section " + format_number(a.pred.x_lo) + " and " + format_number(a.pred.x_hi);
  return s;
}

// Replaces each NUM placeholder with a decimal-number pattern.
inline std::string with_numbers(std::string pattern) {
  const std::string num = "-?[0-9]+(?:\\.[0-9]+)?(?:e[+-]?[0-9]+)?";
  for (std::size_t p = pattern.find("NUM"); p != std::string::npos; p = pattern.find("NUM", p + num.size()))
    pattern.replace(p, 3, num);
  return pattern;
}

inline std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

inline std::string premises(const PdeSystem& sys) {
  const auto& m = sys.materials;
  std::string s = "Consider a rod of length " + format_number(sys.length) + " mm";
  if (m.size() == 2) s += " made of two materials joined at x = " + format_number(m[0].x_end) + " mm";
  s += ". ";
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double start = i == 0 ? 0.0 : m[i - 1].x_end;
    s += "The section from " + format_number(start) + " mm to " + format_number(m[i].x_end) + " mm has density " +
         format_number(m[i].rho);
    if (sys.kind == PdeKind::Heat)
      s += ", specific heat capacity " + format_number(m[i].c) + " and thermal conductivity " + format_number(m[i].kappa) + ". ";
    else s += " and Young's modulus " + format_number(m[i].E) + ". ";
  }
  if (sys.kind == PdeKind::Heat) {
    s += "The temperature at x = 0 is fixed at " + format_number(sys.g0) + " K";
    if (sys.u0.constant) s += " and the rod starts at a uniform " + format_number(*sys.u0.constant) + " K";
    else s += " and the initial temperature is given on " + std::to_string(sys.u0.nodes.size()) + " nodes";
    s += ". A heat source is applied at x = " + format_number(sys.length) + " mm";
  } else {
    s += "The displacement at x = 0 is fixed at " + format_number(sys.g0) + " mm";
    if (sys.u0.constant) s += " and the rod starts at rest with displacement " + format_number(*sys.u0.constant) + " mm";
    else s += " and the initial displacement is given on " + std::to_string(sys.u0.nodes.size()) + " nodes";
    s += ". A force is applied at x = " + format_number(sys.length) + " mm";
  }
  s += " over a time horizon of " + format_number(sys.tmax) + " s.";
  return s;
}

}  // namespace detail

/// Premises followed by the constraint text for the formula's structure.
inline std::string render_nl(const PdeSystem& sys, const Formula& f) {
  const auto shape = structure_of(f);
  if (!shape) throw SemanticsError("formula shape has no sentence template");
  const auto atoms = f.atoms();
  std::vector<std::string> c;
  for (std::size_t i = 0; i < atoms.size(); ++i) c.push_back(detail::atom_clause(sys.kind, atoms[i], i));
  using detail::capitalize;
  std::string body;
  switch (*shape) {
    case Structure::Single: body = capitalize(c[0]) + "."; break;
    case Structure::And: body = capitalize(c[0]) + ". Moreover, " + c[1] + "."; break;
    case Structure::Or: body = "Either " + c[0] + ", or " + c[1] + "."; break;
    case Structure::OrOr: body = "Satisfy at least one of the following: " + c[0] + "; or " + c[1] + "; or " + c[2] + "."; break;
    case Structure::AndAnd: body = capitalize(c[0]) + ". Moreover, " + c[1] + ". Moreover, " + c[2] + "."; break;
    case Structure::OrThenAnd:
      body = "Either satisfy the condition that " + c[0] + " or satisfy the condition that " + c[1] +
             "; in addition, satisfy the condition that " + c[2] + ".";
      break;
    case Structure::OrOfAnd:
      body = "Either satisfy the condition that " + c[0] + "; or satisfy the conditions that " + c[1] + " and also " + c[2] + ".";
      break;
    case Structure::AndThenOr:
      body = "Either satisfy the conditions that " + c[0] + " and also " + c[1] + "; or satisfy the condition that " + c[2] + ".";
      break;
    case Structure::AndOfOr: body = "Satisfy " + c[0] + ". Afterwards, either consider " + c[1] + " or " + c[2] + "."; break;
  }
  return detail::premises(sys) + " " + body;
}

/// Reads atoms and structure back out of text produced by render_nl.
inline Formula parse_nl(const std::string& nl) {
  static const std::regex clause(detail::with_numbers(
      "(for one point during|for all time between) the time interval (NUM) and (NUM), the "
      "(?:temperature distribution|displacement) of the rod should be (larger than|lower than|the same as|stretched "
      "over|compressed below|equal to) the linear profile mu\\d+\\(x\\) = (NUM) \\* x \\+ (NUM) between section (NUM) "
      "and (NUM)"),
      std::regex::icase);
  std::vector<Formula> atoms;
  std::string skeleton;
  std::size_t last = 0;
  for (auto it = std::sregex_iterator(nl.begin(), nl.end(), clause); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    TemporalAtom a;
    a.op = std::tolower(static_cast<unsigned char>(m[1].str()[4])) == 'o' ? TemporalOp::F : TemporalOp::G;
    const std::string cmp = m[4].str();
    a.pred.cmp = (cmp == "larger than" || cmp == "stretched over") ? Cmp::GT
                 : (cmp == "lower than" || cmp == "compressed below") ? Cmp::LT
                                                                      : Cmp::EQ;
    auto num = [](const std::string& s) {
      double v;
      if (!parse_double(s, v)) throw SyntaxError("bad number '" + s + "' in description");
      return v;
    };
    a.t_lo = num(m[2].str());
    a.t_hi = num(m[3].str());
    a.pred.a = num(m[5].str());
    a.pred.b = num(m[6].str());
    a.pred.x_lo = num(m[7].str());
    a.pred.x_hi = num(m[8].str());
    atoms.push_back(Formula::atom(a));
    skeleton += nl.substr(last, static_cast<std::size_t>(m.position(0)) - last) + "#";
    last = static_cast<std::size_t>(m.position(0) + m.length(0));
  }
  skeleton += nl.substr(last);
  if (atoms.empty()) throw SyntaxError("no constraint clause found");
  const auto body = skeleton.substr(skeleton.find('#') == std::string::npos ? 0 : skeleton.rfind(". ", skeleton.find('#')) + 2);
  static const std::vector<std::pair<std::string, Structure>> templates = {
      {"#.", Structure::Single},
      {"#. Moreover, #.", Structure::And},
      {"Either #, or #.", Structure::Or},
      {"Satisfy at least one of the following: #; or #; or #.", Structure::OrOr},
      {"#. Moreover, #. Moreover, #.", Structure::AndAnd},
      {"Either satisfy the condition that # or satisfy the condition that #; in addition, satisfy the condition that #.",
       Structure::OrThenAnd},
      {"Either satisfy the condition that #; or satisfy the conditions that # and also #.", Structure::OrOfAnd},
      {"Either satisfy the conditions that # and also #; or satisfy the condition that #.", Structure::AndThenOr},
      {"Satisfy #. Afterwards, either consider # or #.", Structure::AndOfOr},
  };
  for (const auto& [text, s] : templates)
    if (body == text) return build_formula(s, atoms);
  throw SyntaxError("description does not follow a known sentence template");
}

struct DatasetRecord {
  ProblemInstance inst;
  std::string nl;
  std::string stl_math;
  CspecText cspec;
};

/// Builds the record and checks that the cspec, math and NL routes all
/// parse back to the sampled formula and that it validates.
inline DatasetRecord make_record(const ProblemInstance& inst) {
  DatasetRecord r{inst, render_nl(inst.sys, inst.formula), print_math(inst.formula), print_cspec(inst.formula)};
  const Formula via_cspec = parse_cspec(r.cspec.regions, r.cspec.cspec);
  const Formula via_math = parse_mathform(r.stl_math);
  const Formula via_nl = parse_nl(r.nl);
  if (!(via_cspec == inst.formula) || !(via_math == inst.formula) || !(via_nl == inst.formula))
    throw SemanticsError("record " + std::to_string(inst.seed) + " does not round-trip");
  const auto report = validate(inst.formula, inst.sys);
  if (!report.valid) throw SemanticsError("record " + std::to_string(inst.seed) + ": " + report.issues.front());
  return r;
}

inline Json record_to_json(const DatasetRecord& r) {
  Json regions = Json::object();
  for (const auto& [label, pred] : r.cspec.regions) regions[label] = print_region(pred);
  return Json{{"nl", r.nl},
              {"stl_math", r.stl_math},
              {"regions", regions},
              {"cspec", r.cspec.cspec},
              {"system", system_to_json(r.inst.sys)},
              {"seed", r.inst.seed},
              {"format", r.inst.format.id()}};
}

/// Paraphrases keyed by record seed (decimal string) in a JSON object.
using ParaphraseMap = std::map<std::string, std::vector<std::string>>;

inline ParaphraseMap load_paraphrases(const std::filesystem::path& path) {
  const Json j = parse_json(read_text(path), path.string());
  if (!j.is_object()) throw ConfigError("paraphrase file must map seeds to lists of strings");
  ParaphraseMap out;
  for (const auto& [seed, list] : j.items()) out[seed] = list.get<std::vector<std::string>>();
  return out;
}

enum class Split { Train, Test };

inline const char* to_string(Split s) { return s == Split::Train ? "train" : "test"; }

struct DatasetSummary {
  std::size_t records = 0;
  std::size_t files = 0;
};

/// Writes one JSONL file per format plus a merged {kind}_{split}.jsonl.
/// Record j of format i uses seed mix_seed(mix_seed(seed, split), i * per_format + j).
inline DatasetSummary emit_dataset(const std::vector<SyntaxFormat>& formats, std::size_t per_format, PdeKind kind,
                                   Split split, const std::filesystem::path& out_dir, std::uint64_t seed,
                                   const ParaphraseMap* paraphrases = nullptr) {
  if (per_format < 1) throw ConfigError("per_format must be at least 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const std::string prefix = std::string(to_string(kind)) + "_" + to_string(split);
  const std::uint64_t split_seed = mix_seed(seed, split == Split::Train ? 0 : 1);
  std::ofstream merged(out_dir / (prefix + ".jsonl"), std::ios::binary);
  if (!merged) throw IoError("cannot write " + (out_dir / (prefix + ".jsonl")).string());
  DatasetSummary sum{0, 1};
  for (std::size_t i = 0; i < formats.size(); ++i) {
    const auto path = out_dir / (prefix + "_" + formats[i].id() + ".jsonl");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t j = 0; j < per_format; ++j) {
      const std::uint64_t s = mix_seed(split_seed, i * per_format + j);
      Json rec = record_to_json(make_record(sample_instance(formats[i], kind, s)));
      if (paraphrases) {
        auto it = paraphrases->find(std::to_string(s));
        if (it != paraphrases->end()) rec["paraphrases"] = it->second;
      }
      const std::string line = rec.dump() + "\n";
      out << line;
      merged << line;
      ++sum.records;
    }
    if (!out) throw IoError("write failed for " + path.string());
    ++sum.files;
  }
  if (!merged) throw IoError("write failed for merged dataset");
  return sum;
}

}  // namespace stlpde

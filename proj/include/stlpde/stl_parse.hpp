#pragma once

#include <cctype>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "stlpde/errors.hpp"
#include "stlpde/stl.hpp"
#include "stlpde/util.hpp"

namespace stlpde {

/// Region label -> spatial predicate, as carried next to a cspec string.
using RegionMap = std::map<std::string, LinearPredicate>;

struct CspecText {
  RegionMap regions;
  std::string cspec;
};

namespace detail {

enum class Tok {
  LParen, RParen, LBrack, RBrack, LBrace, RBrace, Comma, Colon,
  And, Or, Temporal, Number, Label, Forall, In, VarX, VarU, Lambda,
  Plus, Minus, Star, Slash, Less, Greater, Equal, End,
};

enum class Dialect { Cspec, Math, Region };

struct Token {
  Tok kind = Tok::End;
  std::size_t pos = 0;
  double value = 0.0;
  std::string text;
  TemporalOp op = TemporalOp::G;
};

inline bool starts_with(std::string_view s, std::size_t i, std::string_view p) {
  return s.size() - i >= p.size() && s.substr(i, p.size()) == p;
}

inline std::vector<Token> tokenize(std::string_view s, Dialect dialect) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto push = [&](Tok kind, std::size_t pos) { out.push_back(Token{kind, pos, 0.0, {}, TemporalOp::G}); };
  auto fail = [&](const std::string& msg, std::size_t pos) -> void {
    throw SyntaxError(msg + " at offset " + std::to_string(pos));
  };
  const bool math = dialect == Dialect::Math;

  // Multi-byte spellings accepted by the math and region notations.
  struct Spelling {
    std::string_view text;
    Tok kind;
  };
  static constexpr Spelling unicode[] = {
      {"∀", Tok::Forall}, {"∈", Tok::In},    {"∧", Tok::And},     {"∨", Tok::Or},
      {"−", Tok::Minus},  {"·", Tok::Star},  {"⋅", Tok::Star},    {"×", Tok::Star},
      {"≤", Tok::Less},   {"≥", Tok::Greater}, {"<=", Tok::Less},      {">=", Tok::Greater},
      {"/\\", Tok::And},       {"\\/", Tok::Or},
  };

  while (i < s.size()) {
    const unsigned char ch = static_cast<unsigned char>(s[i]);
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      ++i;
      continue;
    }
    if (dialect != Dialect::Cspec) {
      bool matched = false;
      for (const auto& sp : unicode) {
        if (starts_with(s, i, sp.text)) {
          push(sp.kind, i);
          i += sp.text.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (math && ch == '$') {
      ++i;
      continue;
    }
    if (math && ch == '\\') {
      std::size_t j = i + 1;
      if (j < s.size() && s[j] == '\\') {  // LaTeX line break
        i = j + 1;
        continue;
      }
      while (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) ++j;
      const std::string_view cmd = s.substr(i + 1, j - i - 1);
      if (cmd == "land" || cmd == "wedge") push(Tok::And, i);
      else if (cmd == "lor" || cmd == "vee") push(Tok::Or, i);
      else if (cmd == "forall") push(Tok::Forall, i);
      else if (cmd == "in") push(Tok::In, i);
      else if (cmd == "cdot" || cmd == "times") push(Tok::Star, i);
      else if (cmd == "left" || cmd == "right" || cmd == "quad" || cmd == "qquad") {
      } else if (cmd.empty() && j < s.size() && (s[j] == ',' || s[j] == ';' || s[j] == '!')) {
        ++j;  // thin spaces
      } else {
        fail("unknown command \\" + std::string(cmd), i);
      }
      i = j;
      continue;
    }
    if (std::isdigit(ch) || (ch == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      if (j < s.size() && s[j] == '.') {
        ++j;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      }
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          while (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) ++k;
          j = k;
        }
      }
      Token t{Tok::Number, i, 0.0, std::string(s.substr(i, j - i)), TemporalOp::G};
      if (!parse_double(t.text, t.value)) fail("malformed number '" + t.text + "'", i);
      out.push_back(std::move(t));
      i = j;
      continue;
    }
    if (std::isalpha(ch)) {
      std::size_t j = i;
      while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
      const std::string_view word = s.substr(i, j - i);
      if ((word == "G" || word == "F") && j < s.size() && (s[j] == '_' || s[j] == '[' || s[j] == '{')) {
        Token t{Tok::Temporal, i, 0.0, std::string(word), word == "G" ? TemporalOp::G : TemporalOp::F};
        out.push_back(std::move(t));
        i = (s[j] == '_') ? j + 1 : j;
        continue;
      }
      if (dialect == Dialect::Cspec) {
        if (!std::isupper(ch)) fail("region labels must start with an upper-case letter", i);
        out.push_back(Token{Tok::Label, i, 0.0, std::string(word), TemporalOp::G});
        i = j;
        continue;
      }
      if (word == "x") {
        push(Tok::VarX, i);
      } else if (word == "u") {
        push(Tok::VarU, i);
        // u(x) is one token; a bare u is accepted too.
        std::size_t k = j;
        while (k < s.size() && s[k] == ' ') ++k;
        if (k < s.size() && s[k] == '(') {
          std::size_t m = k + 1;
          while (m < s.size() && s[m] == ' ') ++m;
          if (m < s.size() && s[m] == 'x') {
            ++m;
            while (m < s.size() && s[m] == ' ') ++m;
            if (m < s.size() && s[m] == ')') j = m + 1;
          }
        }
      } else if (math && word == "forall") {
        push(Tok::Forall, i);
      } else if (math && word == "in") {
        push(Tok::In, i);
      } else if (math && (word == "v" || word == "or")) {
        push(Tok::Or, i);
      } else if (math && word == "and") {
        push(Tok::And, i);
      } else if (dialect == Dialect::Region && word == "lambda") {
        push(Tok::Lambda, i);
      } else {
        fail("unexpected word '" + std::string(word) + "'", i);
      }
      i = j;
      continue;
    }
    switch (ch) {
      case '(': push(Tok::LParen, i); break;
      case ')': push(Tok::RParen, i); break;
      case '[': push(Tok::LBrack, i); break;
      case ']': push(Tok::RBrack, i); break;
      case ',': push(Tok::Comma, i); break;
      case '&': push(Tok::And, i); break;
      case '|': push(Tok::Or, i); break;
      default:
        if (dialect == Dialect::Cspec) fail(std::string("unexpected character '") + s[i] + "'", i);
        switch (ch) {
          case '{': push(Tok::LBrace, i); break;
          case '}': push(Tok::RBrace, i); break;
          case ':': push(Tok::Colon, i); break;
          case '+': push(Tok::Plus, i); break;
          case '-': push(Tok::Minus, i); break;
          case '*': push(Tok::Star, i); break;
          case '/': push(Tok::Slash, i); break;
          case '<': push(Tok::Less, i); break;
          case '>': push(Tok::Greater, i); break;
          case '=': push(Tok::Equal, i); break;
          case '^': push(Tok::And, i); break;
          case '"':
          case '\'': break;
          default: fail("unexpected character", i);
        }
    }
    ++i;
  }
  out.push_back(Token{Tok::End, s.size(), 0.0, {}, TemporalOp::G});
  return out;
}

/// c_u * u + c_x * x + c
struct Linear {
  double u = 0.0;
  double x = 0.0;
  double c = 0.0;

  bool is_constant() const { return u == 0.0 && x == 0.0; }
};

class Parser {
 public:
  Parser(std::string_view text, Dialect dialect, const RegionMap* regions = nullptr)
      : tokens_(tokenize(text, dialect)), regions_(regions) {}

  Formula formula() {
    if (peek().kind == Tok::End) throw SyntaxError("empty formula");
    Formula f = or_expr();
    expect(Tok::End, "end of input");
    return f;
  }

  LinearPredicate region() {
    expect(Tok::LBrack, "'['");
    const double lo = signed_number();
    expect(Tok::Comma, "','");
    const double hi = signed_number();
    expect(Tok::RBrack, "']'");
    expect(Tok::Comma, "','");
    const Cmp cmp = comparison_token();
    expect(Tok::Comma, "','");
    if (accept(Tok::Lambda)) {
      expect(Tok::VarX, "'x'");
      expect(Tok::Colon, "':'");
    }
    const Linear lin = linear();
    if (lin.u != 0.0) throw SyntaxError("profile may not depend on u");
    expect(Tok::End, "end of region");
    if (!(lo <= hi)) throw SemanticsError("inverted space range");
    return LinearPredicate{lo, hi, cmp, lin.x, lin.c};
  }

 private:
  static constexpr int kMaxDepth = 200;

  struct DepthGuard {
    explicit DepthGuard(int& d) : depth(d) {
      if (++depth > kMaxDepth) throw SyntaxError("nesting too deep");
    }
    ~DepthGuard() { --depth; }
    int& depth;
  };

  const Token& peek() const { return tokens_[pos_]; }

  bool accept(Tok kind) {
    if (peek().kind != kind) return false;
    ++pos_;
    return true;
  }

  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind)
      throw SyntaxError(std::string("expected ") + what + " at offset " + std::to_string(peek().pos));
    return tokens_[pos_++];
  }

  double signed_number() {
    double sign = 1.0;
    while (peek().kind == Tok::Minus || peek().kind == Tok::Plus)
      if (tokens_[pos_++].kind == Tok::Minus) sign = -sign;
    return sign * expect(Tok::Number, "number").value;
  }

  Cmp comparison_token() {
    switch (peek().kind) {
      case Tok::Less: ++pos_; return Cmp::LT;
      case Tok::Greater: ++pos_; return Cmp::GT;
      case Tok::Equal: ++pos_; return Cmp::EQ;
      default: throw SyntaxError("expected comparison at offset " + std::to_string(peek().pos));
    }
  }

  Formula or_expr() {
    DepthGuard guard(depth_);
    Formula f = and_expr();
    while (accept(Tok::Or)) f = Formula::disj(f, and_expr());
    return f;
  }

  Formula and_expr() {
    Formula f = primary();
    while (accept(Tok::And)) f = Formula::conj(f, primary());
    return f;
  }

  Formula primary() {
    DepthGuard guard(depth_);
    if (accept(Tok::LParen)) {
      Formula f = or_expr();
      expect(Tok::RParen, "')'");
      return f;
    }
    const Token& t = expect(Tok::Temporal, "'G_[' or 'F_['");
    const TemporalOp op = t.op;
    const bool braced = accept(Tok::LBrace);
    expect(Tok::LBrack, "'['");
    const double lo = signed_number();
    expect(Tok::Comma, "','");
    const double hi = signed_number();
    expect(Tok::RBrack, "']'");
    if (braced) expect(Tok::RBrace, "'}'");
    if (!(lo <= hi)) throw SemanticsError("inverted time window [" + format_number(lo) + ", " + format_number(hi) + "]");
    if (lo < 0.0) throw SemanticsError("negative time window");
    Window w{op, lo, hi};
    return regions_ ? label_group(w) : predicate_group(w);
  }

  struct Window {
    TemporalOp op;
    double lo;
    double hi;
  };

  Formula make_atom(const Window& w, const LinearPredicate& p) {
    return Formula::atom(TemporalAtom{w.op, w.lo, w.hi, p});
  }

  // G distributes over conjunction and F over disjunction; the other two
  // combinations have no atom-level equivalent.
  Formula combine(const Window& w, Tok conn, Formula lhs, Formula rhs) {
    if (conn == Tok::And) {
      if (w.op != TemporalOp::G) throw SyntaxError("F over a conjunction of regions is not expressible");
      return Formula::conj(std::move(lhs), std::move(rhs));
    }
    if (w.op != TemporalOp::F) throw SyntaxError("G over a disjunction of regions is not expressible");
    return Formula::disj(std::move(lhs), std::move(rhs));
  }

  // cspec operands: labels joined by & and |.
  Formula label_group(const Window& w) {
    DepthGuard guard(depth_);
    if (accept(Tok::LParen)) {
      Formula f = label_or(w);
      expect(Tok::RParen, "')'");
      return f;
    }
    const Token& t = expect(Tok::Label, "region label");
    auto it = regions_->find(t.text);
    if (it == regions_->end()) throw SyntaxError("unknown region label '" + t.text + "'");
    return make_atom(w, it->second);
  }

  Formula label_or(const Window& w) {
    Formula f = label_and(w);
    while (accept(Tok::Or)) f = combine(w, Tok::Or, f, label_and(w));
    return f;
  }

  Formula label_and(const Window& w) {
    Formula f = label_group(w);
    while (accept(Tok::And)) f = combine(w, Tok::And, f, label_group(w));
    return f;
  }

  // Math operands: quantified comparisons joined by connectives.
  Formula predicate_group(const Window& w) {
    DepthGuard guard(depth_);
    if (accept(Tok::LParen)) {
      Formula f = predicate_or(w);
      expect(Tok::RParen, "')'");
      return f;
    }
    return quantified(w);
  }

  Formula predicate_or(const Window& w) {
    Formula f = predicate_and(w);
    while (accept(Tok::Or)) f = combine(w, Tok::Or, f, predicate_and(w));
    return f;
  }

  Formula predicate_and(const Window& w) {
    Formula f = predicate_group(w);
    while (accept(Tok::And)) f = combine(w, Tok::And, f, predicate_group(w));
    return f;
  }

  Formula quantified(const Window& w) {
    expect(Tok::Forall, "'forall'");
    expect(Tok::VarX, "'x'");
    expect(Tok::In, "'in'");
    expect(Tok::LBrack, "'['");
    const double lo = signed_number();
    expect(Tok::Comma, "','");
    const double hi = signed_number();
    expect(Tok::RBrack, "']'");
    if (!accept(Tok::Colon)) accept(Tok::Comma);
    if (!(lo <= hi)) throw SemanticsError("inverted space range");
    LinearPredicate p = comparison_body();
    p.x_lo = lo;
    p.x_hi = hi;
    return make_atom(w, p);
  }

  LinearPredicate comparison_body() {
    DepthGuard guard(depth_);
    // "(body)" versus "(linear) < rhs": decided by what follows the matching ')'.
    if (peek().kind == Tok::LParen && !is_comparison(tokens_[matching_paren(pos_) + 1].kind)) {
      ++pos_;
      LinearPredicate p = comparison_body();
      expect(Tok::RParen, "')'");
      return p;
    }
    const Linear lhs = linear();
    const Cmp cmp = comparison_token();
    const Linear rhs = linear();
    const Linear diff{lhs.u - rhs.u, lhs.x - rhs.x, lhs.c - rhs.c};
    if (diff.u == 0.0) throw SyntaxError("comparison does not constrain u(x)");
    Cmp out = cmp;
    if (diff.u < 0.0 && cmp != Cmp::EQ) out = (cmp == Cmp::LT) ? Cmp::GT : Cmp::LT;
    LinearPredicate p;
    p.cmp = out;
    p.a = -diff.x / diff.u;
    p.b = -diff.c / diff.u;
    if (p.a == 0.0) p.a = 0.0;
    if (p.b == 0.0) p.b = 0.0;
    return p;
  }

  static bool is_comparison(Tok kind) { return kind == Tok::Less || kind == Tok::Greater || kind == Tok::Equal; }

  /// Index of the ')' closing the '(' at `open`; the End token if unbalanced.
  std::size_t matching_paren(std::size_t open) const {
    int level = 0;
    for (std::size_t i = open; i < tokens_.size(); ++i) {
      if (tokens_[i].kind == Tok::LParen) ++level;
      if (tokens_[i].kind == Tok::RParen && --level == 0) return i;
    }
    return tokens_.size() - 2;  // keeps the +1 lookahead on End
  }

  Linear linear() {
    DepthGuard guard(depth_);
    Linear acc = term();
    for (;;) {
      if (accept(Tok::Plus)) {
        const Linear t = term();
        acc = {acc.u + t.u, acc.x + t.x, acc.c + t.c};
      } else if (accept(Tok::Minus)) {
        const Linear t = term();
        acc = {acc.u - t.u, acc.x - t.x, acc.c - t.c};
      } else {
        return acc;
      }
    }
  }

  Linear term() {
    Linear acc = unary();
    for (;;) {
      if (accept(Tok::Star)) {
        const Linear f = unary();
        if (f.is_constant()) acc = {acc.u * f.c, acc.x * f.c, acc.c * f.c};
        else if (acc.is_constant()) acc = {f.u * acc.c, f.x * acc.c, f.c * acc.c};
        else throw SyntaxError("nonlinear product");
      } else if (accept(Tok::Slash)) {
        const Linear f = unary();
        if (!f.is_constant() || f.c == 0.0) throw SyntaxError("division by a non-constant or zero");
        acc = {acc.u / f.c, acc.x / f.c, acc.c / f.c};
      } else {
        return acc;
      }
    }
  }

  Linear unary() {
    DepthGuard guard(depth_);
    if (accept(Tok::Minus)) {
      const Linear v = unary();
      return {-v.u, -v.x, -v.c};
    }
    if (accept(Tok::Plus)) return unary();
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: ++pos_; return {0.0, 0.0, t.value};
      case Tok::VarX: ++pos_; return {0.0, 1.0, 0.0};
      case Tok::VarU: ++pos_; return {1.0, 0.0, 0.0};
      case Tok::LParen: {
        ++pos_;
        const Linear v = linear();
        expect(Tok::RParen, "')'");
        return v;
      }
      default: throw SyntaxError("expected term at offset " + std::to_string(t.pos));
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int depth_ = 0;
  const RegionMap* regions_;
};

inline std::string label_for(std::size_t index) {
  std::string label(1, static_cast<char>('A' + index % 26));
  if (index >= 26) label += std::to_string(index / 26);
  return label;
}

}  // namespace detail

/// Parses the `cspec` form, e.g. "((G_[0, 1] (A)) & (F_[2, 3] (B)))".
inline Formula parse_cspec(const RegionMap& regions, std::string_view cspec) {
  detail::Parser p(cspec, detail::Dialect::Cspec, &regions);
  return p.formula();
}

/// Parses the mathematical notation, e.g.
/// "G_[2.62, 4.50] (forall x in [22, 87] (u(x) - (-0.0122 * x + 294.2976) > 0))".
inline Formula parse_mathform(std::string_view text) {
  detail::Parser p(text, detail::Dialect::Math);
  return p.formula();
}

/// Parses a region definition: `[x_lo, x_hi], "<", a * x + b`.
inline LinearPredicate parse_region(std::string_view text) {
  detail::Parser p(text, detail::Dialect::Region);
  return p.region();
}

inline std::string profile_text(double a, double b) {
  return format_number(a) + " * x + " + format_number(b);
}

inline std::string print_region(const LinearPredicate& p) {
  return "[" + format_number(p.x_lo) + ", " + format_number(p.x_hi) + "], \"" + cmp_symbol(p.cmp) + "\", " +
         profile_text(p.a, p.b);
}

namespace detail {

inline std::string print_cspec_node(const Formula& f, std::size_t& next, RegionMap& regions) {
  if (f.is_atom()) {
    const auto& a = f.as_atom();
    const std::string label = label_for(next++);
    regions.emplace(label, a.pred);
    return std::string("(") + op_symbol(a.op) + "_[" + format_number(a.t_lo) + ", " + format_number(a.t_hi) +
           "] (" + label + "))";
  }
  const std::string lhs = print_cspec_node(f.lhs(), next, regions);
  const std::string rhs = print_cspec_node(f.rhs(), next, regions);
  return "(" + lhs + (f.kind() == Formula::Kind::And ? " & " : " | ") + rhs + ")";
}

inline std::string print_math_atom(const TemporalAtom& a) {
  return std::string(op_symbol(a.op)) + "_[" + format_number(a.t_lo) + ", " + format_number(a.t_hi) +
         "] (forall x in [" + format_number(a.pred.x_lo) + ", " + format_number(a.pred.x_hi) + "] (u(x) - (" +
         profile_text(a.pred.a, a.pred.b) + ") " + cmp_symbol(a.pred.cmp) + " 0))";
}

}  // namespace detail

/// Inverse of parse_cspec; labels are A, B, C, ... in left-to-right atom order.
inline CspecText print_cspec(const Formula& f) {
  CspecText out;
  std::size_t next = 0;
  out.cspec = detail::print_cspec_node(f, next, out.regions);
  return out;
}

/// Fully parenthesized math notation accepted by parse_mathform.
inline std::string print_math(const Formula& f) {
  if (f.is_atom()) return detail::print_math_atom(f.as_atom());
  const char* conn = f.kind() == Formula::Kind::And ? " ∧ " : " ∨ ";
  return "(" + print_math(f.lhs()) + ")" + conn + "(" + print_math(f.rhs()) + ")";
}

}  // namespace stlpde

#include <gtest/gtest.h>

#include <string>

#include "support.hpp"

using namespace stlpde;
using namespace testing_support;

namespace {

RegionMap three_regions() {
  return {{"A", parse_region(R"([9829, 19907], "<", 1.882e-05 * x + 0.187)")},
          {"B", parse_region(R"([40199, 56082], "<", 3.356e-06 * x - 0.510)")},
          {"C", parse_region(R"([75646, 98769], ">", -1.390e-05 * x + 2.844)")}};
}

const char* kThreeAtomCspec = "(((G_[0.049, 0.053] (A)) & (F_[0.051, 0.149] (B))) | (F_[0.061, 0.169] (C)))";

}  // namespace

TEST(Cspec, ThreeAtomSnippetParsesToAndThenOr) {
  const Formula f = parse_cspec(three_regions(), kThreeAtomCspec);
  ASSERT_EQ(f.kind(), Formula::Kind::Or);
  ASSERT_EQ(f.lhs().kind(), Formula::Kind::And);
  EXPECT_TRUE(f.rhs().is_atom());
  const auto atoms = f.atoms();
  ASSERT_EQ(atoms.size(), 3u);
  EXPECT_EQ(atoms[0].op, TemporalOp::G);
  EXPECT_EQ(atoms[0].t_lo, 0.049);
  EXPECT_EQ(atoms[0].t_hi, 0.053);
  EXPECT_EQ(atoms[1].pred.b, -0.510);
  EXPECT_EQ(atoms[2].pred.cmp, Cmp::GT);
  EXPECT_EQ(atoms[2].pred.a, -1.390e-05);
  EXPECT_EQ(structure_of(f), Structure::AndThenOr);
}

TEST(Cspec, PrintsThreeAtomSnippetVerbatim) {
  const Formula f = parse_cspec(three_regions(), kThreeAtomCspec);
  const CspecText text = print_cspec(f);
  EXPECT_EQ(text.cspec, kThreeAtomCspec);
  ASSERT_EQ(text.regions.size(), 3u);
  EXPECT_EQ(print_region(text.regions.at("A")), R"([9829, 19907], "<", 1.882e-05 * x + 0.187)");
  EXPECT_EQ(print_region(text.regions.at("B")), R"([40199, 56082], "<", 3.356e-06 * x + -0.51)");
}

TEST(Cspec, SmallestInstance) {
  const RegionMap r{{"A", parse_region(R"([0, 1], "<", 0 * x + 1)")}};
  const Formula f = parse_cspec(r, "(G_[0, 1] (A))");
  ASSERT_TRUE(f.is_atom());
  const CspecText back = print_cspec(f);
  EXPECT_EQ(back.cspec, "(G_[0, 1] (A))");
  EXPECT_EQ(back.regions.size(), 1u);
  EXPECT_EQ(back.regions.begin()->first, "A");
}

TEST(Cspec, DocumentedErrors) {
  const RegionMap r{{"A", parse_region(R"([0, 1], "<", 0 * x + 1)")}};
  EXPECT_THROW(parse_cspec(r, "(G_[1, 0] (A))"), SemanticsError);
  EXPECT_THROW(parse_cspec(r, "((G_[0, 1] (A))"), SyntaxError);
  EXPECT_THROW(parse_cspec(r, "(G_[0, 1] (Z))"), SyntaxError);
  EXPECT_THROW(parse_cspec(r, "(G_[0, 1.2.3] (A))"), SyntaxError);
  EXPECT_THROW(parse_cspec(r, ""), SyntaxError);
  EXPECT_THROW(parse_region(R"([2, 1], "<", 0 * x + 1)"), SemanticsError);
  EXPECT_THROW(parse_region(R"([0, 1], "!=", 0 * x + 1)"), SyntaxError);
}

TEST(Cspec, ChainsAreLeftAssociated) {
  const RegionMap r{{"A", parse_region(R"([0, 1], ">", 0 * x + 1)")},
                    {"B", parse_region(R"([0, 1], ">", 0 * x + 2)")},
                    {"C", parse_region(R"([0, 1], ">", 0 * x + 3)")}};
  const Formula f = parse_cspec(r, "(G_[0, 1] (A)) & (G_[0, 1] (B)) & (G_[0, 1] (C))");
  ASSERT_EQ(f.kind(), Formula::Kind::And);
  EXPECT_EQ(f.lhs().kind(), Formula::Kind::And);
  EXPECT_TRUE(f.rhs().is_atom());
}

TEST(MathForm, RodExampleWithDistributedWindow) {
  const Formula f = parse_mathform(
      "G_[4,5]((∀x∈[30,60]: u(x)−(x/4+303)<0) ∧ (∀x∈[30,60]: u(x)−(x/4+297)>0)) ∧ G_[0,5](∀x∈[100,100]: u(x)−345<0)");
  EXPECT_EQ(f, rod_example());
}

TEST(MathForm, AsciiSpellingMatchesCspecRoute) {
  const Formula f = parse_mathform("G_[2.62, 4.50] (forall x in [22, 87] (u(x) - (-0.0122 * x + 294.2976) > 0))");
  ASSERT_TRUE(f.is_atom());
  const TemporalAtom expected = make_atom(TemporalOp::G, 2.62, 4.5, 22, 87, Cmp::GT, -0.0122, 294.2976);
  EXPECT_EQ(f.as_atom(), expected);
  const CspecText text = print_cspec(f);
  EXPECT_EQ(parse_cspec(text.regions, text.cspec), f);
}

TEST(MathForm, Errors) {
  EXPECT_THROW(parse_mathform(""), SyntaxError);
  EXPECT_THROW(parse_mathform("G_[1, 0] (forall x in [0, 1] (u(x) - 3 > 0))"), SemanticsError);
  EXPECT_THROW(parse_mathform("G_[0, 1] (forall x in [0, 1] (u(x) - 3 >> 0))"), SyntaxError);
}

TEST(RoundTrip, ThousandRandomFormulas) {
  Rng rng(2024);
  for (int n = 0; n < 1000; ++n) {
    const Formula f = random_formula(rng, 100.0 + rng.uniform(0, 200), 1.0 + rng.uniform(0, 10), 8, 20, 3, 300, 50);
    const CspecText text = print_cspec(f);
    ASSERT_EQ(parse_cspec(text.regions, text.cspec), f) << text.cspec;
    ASSERT_EQ(parse_mathform(print_math(f)), f) << print_math(f);
    for (const auto& [label, pred] : text.regions) ASSERT_EQ(parse_region(print_region(pred)), pred);
  }
}

TEST(RoundTrip, LabelsFollowAtomOrder) {
  Rng rng(5);
  const Formula f = random_formula(rng, 100, 5, 8, 20, 3, 300, 50);
  const CspecText text = print_cspec(f);
  const auto atoms = f.atoms();
  std::size_t i = 0;
  for (const auto& [label, pred] : text.regions) {
    EXPECT_EQ(label, std::string(1, static_cast<char>('A' + i)));
    EXPECT_EQ(pred, atoms[i].pred);
    ++i;
  }
}

TEST(Fuzz, ArbitraryBytesOnlyRaiseDocumentedErrors) {
  Rng rng(99);
  const std::string alphabet = "GF_[](),.0123456789&|-+*x<>=ABu \"forallin∀∈:^v∧∨e";
  const RegionMap r{{"A", parse_region(R"([0, 1], "<", 0 * x + 1)")}, {"B", parse_region(R"([0, 1], ">", 2 * x + 1)")}};
  std::size_t parsed = 0;
  for (int n = 0; n < 20000; ++n) {
    std::string s;
    const std::size_t len = rng.index(40);
    for (std::size_t i = 0; i < len; ++i) {
      if (rng.index(4) == 0) s.push_back(static_cast<char>(rng.index(256)));
      else s.push_back(alphabet[rng.index(alphabet.size())]);
    }
    for (int route = 0; route < 3; ++route) {
      try {
        if (route == 0) parse_cspec(r, s);
        else if (route == 1) parse_mathform(s);
        else parse_region(s);
        ++parsed;
      } catch (const SyntaxError&) {
      } catch (const SemanticsError&) {
      }
    }
  }
  // Mutations of a valid string exercise deeper parser states.
  const std::string base = "(((G_[0.049, 0.053] (A)) & (F_[0.051, 0.149] (B))) | (F_[0.061, 0.169] (A)))";
  for (int n = 0; n < 20000; ++n) {
    std::string s = base;
    for (int m = 0; m < 3; ++m) s[rng.index(s.size())] = alphabet[rng.index(alphabet.size())];
    try {
      parse_cspec(r, s);
      ++parsed;
    } catch (const SyntaxError&) {
    } catch (const SemanticsError&) {
    }
  }
  EXPECT_GT(parsed, 0u);
}

TEST(Validate, RodExampleOnItsRod) {
  const auto sys = heat_rod();
  EXPECT_TRUE(validate(rod_example(), sys).valid);
}

TEST(Validate, WindowOrRangeOutsideDomain) {
  const auto sys = heat_rod();
  const auto late = validate(Formula::atom(make_atom(TemporalOp::G, 0, 6, 0, 10, Cmp::GT, 0, 0)), sys);
  EXPECT_FALSE(late.valid);
  ASSERT_FALSE(late.issues.empty());
  EXPECT_NE(late.issues.front().find("time window outside horizon"), std::string::npos);
  const auto wide = validate(Formula::atom(make_atom(TemporalOp::G, 0, 1, 0, 101, Cmp::GT, 0, 0)), sys);
  EXPECT_FALSE(wide.valid);
  EXPECT_NE(wide.issues.front().find("space range outside rod"), std::string::npos);
}

TEST(Formula, ConstructionRejectsInvertedIntervals) {
  EXPECT_THROW(Formula::atom(make_atom(TemporalOp::G, 2, 1, 0, 1, Cmp::GT, 0, 0)), SemanticsError);
  EXPECT_THROW(Formula::atom(make_atom(TemporalOp::G, 0, 1, 2, 1, Cmp::GT, 0, 0)), SemanticsError);
  EXPECT_THROW(Formula::atom(make_atom(TemporalOp::G, -1, 1, 0, 1, Cmp::GT, 0, 0)), SemanticsError);
}

TEST(Formula, ShiftClampsAtZero) {
  const Formula f = Formula::atom(make_atom(TemporalOp::F, 1, 3, 0, 1, Cmp::GT, 0, 0));
  const TemporalAtom s = shift_time(f, -2).as_atom();
  EXPECT_EQ(s.t_lo, 0.0);
  EXPECT_EQ(s.t_hi, 1.0);
}

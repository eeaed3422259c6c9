#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>

#include "support.hpp"

using namespace stlpde;
using namespace testing_support;

namespace {

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

}  // namespace

TEST(Formats, CountsPerArity) {
  const auto start = std::chrono::steady_clock::now();
  const auto formats = enumerate_formats();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::size_t by_arity[4] = {0, 0, 0, 0};
  for (const auto& f : formats) {
    ASSERT_EQ(f.atoms.size(), arity(f.structure));
    ++by_arity[f.atoms.size()];
  }
  EXPECT_EQ(by_arity[1], 6u);
  EXPECT_EQ(by_arity[2], 72u);
  EXPECT_EQ(by_arity[3], 1296u);
  EXPECT_EQ(formats.size(), 1374u);
  EXPECT_LT(secs, 1.0);
}

TEST(Formats, IdsAreUniqueAndOrderIsPinned) {
  const auto formats = enumerate_formats();
  std::set<std::string> ids;
  std::string all;
  for (const auto& f : formats) {
    ids.insert(f.id());
    all += f.id() + "\n";
  }
  EXPECT_EQ(ids.size(), formats.size());
  EXPECT_EQ(formats.front().id(), "single-Glt");
  EXPECT_EQ(formats.back().id(), "and_orp-Feq-Feq-Feq");
  EXPECT_EQ(fnv1a(all), 1434015188439943940ULL);
}

TEST(Formats, FullScaleArithmetic) { EXPECT_EQ(full_scale_count(), 867408u); }

TEST(Formats, StructureRecoveredFromBuiltFormula) {
  const Formula a = rod_example().lhs().lhs();
  for (const auto& f : enumerate_formats()) {
    std::vector<Formula> atoms(f.atoms.size(), a);
    EXPECT_EQ(structure_of(build_formula(f.structure, atoms)), f.structure) << f.id();
  }
}

TEST(Sampling, TenThousandDrawsStayInRange) {
  const auto formats = enumerate_formats();
  Rng pick(5);
  for (PdeKind kind : {PdeKind::Heat, PdeKind::Wave}) {
    std::size_t violations = 0;
    for (std::uint64_t n = 0; n < 10000; ++n) {
      const auto inst = sample_instance(formats[pick.index(formats.size())], kind, mix_seed(99, n));
      const auto bad = out_of_range(inst);
      if (!bad.empty()) {
        ++violations;
        ADD_FAILURE() << to_string(kind) << " seed " << inst.seed << ": " << bad.front();
      }
      EXPECT_TRUE(range_violations(inst.sys, inst.formula).empty());
      if (violations > 5) break;
    }
    EXPECT_EQ(violations, 0u);
  }
}

TEST(Sampling, SameSeedSameInstance) {
  const auto formats = enumerate_formats();
  for (PdeKind kind : {PdeKind::Heat, PdeKind::Wave}) {
    const auto a = sample_instance(formats[900], kind, 12345);
    const auto b = sample_instance(formats[900], kind, 12345);
    EXPECT_EQ(a.sys, b.sys);
    EXPECT_EQ(a.formula, b.formula);
    const auto c = sample_instance(formats[900], kind, 12346);
    EXPECT_FALSE(c.formula == a.formula);
  }
}

TEST(NaturalLanguage, HeatEventuallyGreaterClause) {
  PdeSystem sys = heat_rod();
  const Formula f = Formula::atom(make_atom(TemporalOp::F, 1.5, 3, 20, 60, Cmp::GT, 0.25, 300));
  const std::string nl = render_nl(sys, f);
  EXPECT_NE(nl.find("For one point during the time interval 1.5 and 3, the temperature distribution of the rod should be "
                    "larger than the linear profile mu0(x) = 0.25 * x + 300 between section 20 and 60."),
            std::string::npos)
      << nl;
  EXPECT_EQ(parse_nl(nl), f);
}

TEST(NaturalLanguage, GloballyPhraseAndTemplates) {
  const PdeSystem sys = heat_rod();
  const Formula g = Formula::atom(make_atom(TemporalOp::G, 1, 2, 0, 10, Cmp::LT, 0, 310));
  EXPECT_NE(render_nl(sys, g).find("For all time between the time interval 1 and 2"), std::string::npos);
  const Formula and_or = build_formula(Structure::AndThenOr, {g, g, g});
  const std::string nl = render_nl(sys, and_or);
  EXPECT_NE(nl.find("Either satisfy the conditions that for all time"), std::string::npos) << nl;
  EXPECT_NE(nl.find(" and also for all time"), std::string::npos) << nl;
  EXPECT_NE(nl.find("; or satisfy the condition that for all time"), std::string::npos) << nl;
  const Formula two = Formula::conj(g, g);
  EXPECT_NE(render_nl(sys, two).find(". Moreover, for all time"), std::string::npos);
}

TEST(NaturalLanguage, WavePhrases) {
  const PdeSystem sys = wave_rod();
  const Formula gt = Formula::atom(make_atom(TemporalOp::G, 0.1, 0.2, 0, 1000, Cmp::GT, 1e-5, 1));
  const Formula lt = Formula::atom(make_atom(TemporalOp::G, 0.1, 0.2, 0, 1000, Cmp::LT, 1e-5, 1));
  EXPECT_NE(render_nl(sys, gt).find("displacement of the rod should be stretched over"), std::string::npos);
  EXPECT_NE(render_nl(sys, lt).find("compressed below"), std::string::npos);
  EXPECT_EQ(parse_nl(render_nl(sys, gt)), gt);
}

TEST(NaturalLanguage, DistinctFormulasRenderDistinctly) {
  const auto formats = enumerate_formats();
  for (PdeKind kind : {PdeKind::Heat, PdeKind::Wave}) {
    std::set<std::string> seen;
    std::size_t n = 0;
    for (std::size_t i = 0; i < formats.size(); i += 7) {
      for (std::uint64_t s = 0; s < 3; ++s) {
        const auto inst = sample_instance(formats[i], kind, mix_seed(i, s));
        const std::string nl = render_nl(inst.sys, inst.formula);
        EXPECT_TRUE(seen.insert(nl).second) << nl;
        EXPECT_EQ(parse_nl(nl), inst.formula);
        ++n;
      }
    }
    EXPECT_EQ(seen.size(), n);
  }
  // Same numbers, different operator or comparison or template.
  const PdeSystem sys = heat_rod();
  const Formula a = Formula::atom(make_atom(TemporalOp::G, 1, 2, 0, 10, Cmp::LT, 0, 310));
  const Formula b = Formula::atom(make_atom(TemporalOp::F, 1, 2, 0, 10, Cmp::LT, 0, 310));
  const Formula c = Formula::atom(make_atom(TemporalOp::G, 1, 2, 0, 10, Cmp::EQ, 0, 310));
  std::set<std::string> variants{render_nl(sys, a), render_nl(sys, b), render_nl(sys, c),
                                 render_nl(sys, Formula::conj(a, b)), render_nl(sys, Formula::disj(a, b)),
                                 render_nl(sys, build_formula(Structure::OrThenAnd, {a, b, c})),
                                 render_nl(sys, build_formula(Structure::OrOfAnd, {a, b, c}))};
  EXPECT_EQ(variants.size(), 7u);
}

TEST(Dataset, EmitOnePerFormatRoundTrips) {
  const auto dir = std::filesystem::temp_directory_path() / "stlpde_datagen_test";
  std::filesystem::remove_all(dir);
  const auto formats = enumerate_formats();
  const auto start = std::chrono::steady_clock::now();
  const DatasetSummary sum = emit_dataset(formats, 1, PdeKind::Heat, Split::Train, dir, 2024);
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
  EXPECT_EQ(sum.records, 1374u);
  EXPECT_EQ(sum.files, 1375u);
  const auto merged = dir / "heat_train.jsonl";
  EXPECT_EQ(count_lines(merged), 1374u);
  std::ifstream in(merged);
  std::size_t checked = 0;
  for (std::string line; std::getline(in, line);) {
    const Json rec = Json::parse(line);
    RegionMap regions;
    for (const auto& [label, text] : rec["regions"].items()) regions[label] = parse_region(text.get<std::string>());
    const Formula f = parse_cspec(regions, rec["cspec"].get<std::string>());
    const PdeSystem sys = system_from_json(rec["system"]);
    EXPECT_TRUE(validate(f, sys).valid);
    EXPECT_EQ(parse_mathform(rec["stl_math"].get<std::string>()), f);
    EXPECT_EQ(parse_nl(rec["nl"].get<std::string>()), f);
    ++checked;
  }
  EXPECT_EQ(checked, 1374u);
  EXPECT_EQ(count_lines(dir / ("heat_train_" + formats[10].id() + ".jsonl")), 1u);
  std::filesystem::remove_all(dir);
}

TEST(Dataset, ParaphrasesAttachBySeed) {
  const auto dir = std::filesystem::temp_directory_path() / "stlpde_paraphrase_test";
  std::filesystem::remove_all(dir);
  const std::vector<SyntaxFormat> one{enumerate_formats()[3]};
  const std::uint64_t seed = mix_seed(mix_seed(8, 1), 0);
  const ParaphraseMap para{{std::to_string(seed), {"first wording", "second wording"}}};
  emit_dataset(one, 1, PdeKind::Wave, Split::Test, dir, 8, &para);
  std::ifstream in(dir / "wave_test.jsonl");
  std::string line;
  ASSERT_TRUE(std::getline(in, line));
  const Json rec = Json::parse(line);
  EXPECT_EQ(rec["seed"].get<std::uint64_t>(), seed);
  EXPECT_EQ(rec["paraphrases"].size(), 2u);
  std::filesystem::remove_all(dir);
}

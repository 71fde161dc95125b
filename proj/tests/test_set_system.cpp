#include <gtest/gtest.h>

#include <sstream>

#include "maxcover/errors.hpp"
#include "maxcover/rational.hpp"
#include "maxcover/set_system.hpp"
#include "support.hpp"

namespace maxcover {
namespace {

TEST(LoadInstance, ParsesPathInstance) {
  const SetSystem sys = parse_instance("4 3 2\n1 2\n2 3\n3 4\n");
  EXPECT_EQ(sys, testing::path4());
  EXPECT_EQ(sys.n(), 4);
  EXPECT_EQ(sys.m(), 3);
  EXPECT_EQ(sys.k(), 2);
}

TEST(LoadInstance, MinimalInstance) {
  const SetSystem sys = parse_instance("1 1 1\n1\n");
  EXPECT_EQ(sys, SetSystem(1, 1, {{1}}));
}

TEST(LoadInstance, RejectsBudgetAboveM) {
  try {
    parse_instance("4 3 5\n1 2\n2 3\n3 4\n");
    FAIL() << "k > m accepted";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("k exceeds m"), std::string::npos) << e.what();
  }
}

TEST(LoadInstance, SortsAndDeduplicates) {
  const SetSystem sys = parse_instance("5 2 1\n3 1 3 2\n\n");
  EXPECT_EQ(sys.sets()[0], (std::vector<ElementId>{1, 2, 3}));
  EXPECT_TRUE(sys.sets()[1].empty());
}

TEST(LoadInstance, ErrorsNameTheLine) {
  const auto line_of = [](const std::string& text) {
    try {
      parse_instance(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  EXPECT_EQ(line_of("4 3 2\n1 2\n2 9\n3 4\n"), 3);
  EXPECT_EQ(line_of("4 3 2\n1 x\n2 3\n3 4\n"), 2);
  EXPECT_EQ(line_of("4 3\n"), 1);
  EXPECT_EQ(line_of("2 3 1\n1\n2\n1\n"), 1);  // m > n
  EXPECT_EQ(line_of("4 3 2\n1 2\n"), 3);       // missing set lines
}

TEST(LoadInstance, RoundTripsThroughText) {
  const SetSystem sys = testing::covered_instance(30, 7, 3, 0.2, 11);
  EXPECT_EQ(parse_instance(format_instance(sys)), sys);
}

TEST(Frequency, CountsMemberships) {
  EXPECT_EQ(frequency(testing::path4()), (FrequencyVector{1, 2, 2, 1}));
  EXPECT_EQ(frequency(SetSystem(1, 1, {{1}, {1}, {1}})), (FrequencyVector{3}));
  EXPECT_EQ(frequency(SetSystem(3, 1, {{1}, {3}})), (FrequencyVector{1, 0, 1}));
}

TEST(Frequency, SumsToTotalSize) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorParams g{40, 9, 2, 0.15, std::nullopt, seed};
    const SetSystem sys = generate_random(g);
    std::int64_t sum = 0;
    for (auto f : frequency(sys)) sum += f;
    EXPECT_EQ(sum, sys.total_size());
  }
}

TEST(Coverage, UnionSizes) {
  const SetSystem sys = testing::path4();
  EXPECT_EQ(coverage(sys, Selection{{1, 3}}), 4);
  EXPECT_EQ(coverage(sys, Selection{}), 0);
  EXPECT_EQ(coverage(sys, Selection{{1, 2}}), 3);
}

TEST(Coverage, MonotoneAndBounded) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SetSystem sys = testing::covered_instance(25, 6, 2, 0.25, seed);
    for (std::uint32_t mask = 0; mask < (1u << sys.m()); ++mask) {
      std::vector<SetIndex> sel;
      std::int64_t size_sum = 0;
      for (SetIndex j = 1; j <= sys.m(); ++j) {
        if (mask >> (j - 1) & 1u) {
          sel.push_back(j);
          size_sum += static_cast<std::int64_t>(sys.set(j).size());
        }
      }
      const std::int64_t c = coverage(sys, sel);
      EXPECT_LE(c, size_sum);
      EXPECT_LE(c, sys.n());
      for (SetIndex j = 1; j <= sys.m(); ++j) {
        if (mask >> (j - 1) & 1u) continue;
        auto more = sel;
        more.push_back(j);
        EXPECT_GE(coverage(sys, more), c);
      }
    }
  }
}

TEST(NormalizeCovered, DropsUncoveredElements) {
  const NormalizedInstance out = normalize_covered(SetSystem(5, 1, {{1, 2}, {4}}));
  EXPECT_EQ(out.system, SetSystem(3, 1, {{1, 2}, {3}}));
  EXPECT_EQ(out.original_element, (std::vector<ElementId>{1, 2, 4}));
  EXPECT_FALSE(out.identity);
}

TEST(NormalizeCovered, IdentityOnCoveredInstance) {
  const NormalizedInstance out = normalize_covered(testing::path4());
  EXPECT_EQ(out.system, testing::path4());
  EXPECT_TRUE(out.identity);
  EXPECT_EQ(normalize_covered(out.system).system, out.system);
}

TEST(NormalizeCovered, EmptyUniverse) {
  EXPECT_EQ(normalize_covered(SetSystem(2, 1, {{}})).system.n(), 0);
}

TEST(NormalizeCovered, PreservesEveryCoverage) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    GeneratorParams g{12, 5, 2, 0.12, std::nullopt, seed};
    const SetSystem sys = generate_random(g);
    const SetSystem norm = normalize_covered(sys).system;
    for (auto f : frequency(norm)) EXPECT_GE(f, 1);
    for (std::uint32_t mask = 0; mask < (1u << sys.m()); ++mask) {
      std::vector<SetIndex> sel;
      for (SetIndex j = 1; j <= sys.m(); ++j) {
        if (mask >> (j - 1) & 1u) sel.push_back(j);
      }
      EXPECT_EQ(coverage(norm, sel), coverage(sys, sel));
    }
  }
}

TEST(GenerateRandom, DeterministicForSeed) {
  GeneratorParams g{10, 4, 2, std::nullopt, 3, 7};
  EXPECT_EQ(format_instance(generate_random(g)), format_instance(generate_random(g)));
  const SetSystem sys = generate_random(g);
  for (const auto& s : sys.sets()) EXPECT_EQ(s.size(), 3u);
}

TEST(GenerateRandom, FullDensityGivesWholeUniverse) {
  GeneratorParams g{6, 3, 1, 1.0, std::nullopt, 1};
  const SetSystem sys = generate_random(g);
  for (const auto& s : sys.sets()) {
    EXPECT_EQ(s, (std::vector<ElementId>{1, 2, 3, 4, 5, 6}));
  }
}

TEST(GenerateRandom, FullSelectionBoundedByN) {
  GeneratorParams g{50, 10, 3, 0.1, std::nullopt, 1};
  const SetSystem sys = generate_random(g);
  std::vector<SetIndex> all;
  for (SetIndex j = 1; j <= sys.m(); ++j) all.push_back(j);
  EXPECT_LE(coverage(sys, all), 50);
}

TEST(GenerateRandom, RejectsBadParameters) {
  EXPECT_THROW(generate_random(GeneratorParams{5, 6, 1, 0.5, std::nullopt, 0}), ValidationError);
  EXPECT_THROW(generate_random(GeneratorParams{5, 2, 3, 0.5, std::nullopt, 0}), ValidationError);
  EXPECT_THROW(generate_random(GeneratorParams{5, 2, 1, std::nullopt, std::nullopt, 0}),
               ValidationError);
  EXPECT_THROW(generate_random(GeneratorParams{5, 2, 1, 0.5, 2, 0}), ValidationError);
}

TEST(Rational, ParsesPlainDecimals) {
  EXPECT_EQ(parse_decimal("0.25"), Rational(1, 4));
  EXPECT_EQ(parse_decimal("3"), Rational(3));
  EXPECT_EQ(to_string(parse_decimal("0.1")), "1/10");
  EXPECT_THROW(parse_decimal("1e-2"), std::invalid_argument);
  EXPECT_THROW(parse_decimal("-0.5"), std::invalid_argument);
  EXPECT_THROW(parse_decimal(".5"), std::invalid_argument);
  EXPECT_THROW(parse_decimal(""), std::invalid_argument);
}

TEST(Rational, PowerOfHalfRounding) {
  EXPECT_EQ(round_down_pow2_exponent(Rational(1, 4)), 2);
  EXPECT_EQ(round_down_pow2_exponent(Rational(1, 80)), 7);
  EXPECT_EQ(round_down_pow2_exponent(Rational(1)), 0);
}

}  // namespace
}  // namespace maxcover

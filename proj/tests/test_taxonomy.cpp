#include <gtest/gtest.h>

#include <numeric>
#include <set>
#include <sstream>

#include "cropnet/rng.hpp"
#include "cropnet/taxonomy.hpp"
#include "fixtures.hpp"

using namespace cropnet;

namespace {

TaxonomyTree random_tree(Rng& rng) {
  TaxonomyTree t;
  const auto n = rng.integer(1, 30);
  for (long long i = 0; i < n; ++i) {
    std::array<std::uint8_t, CropCode::kLevels> lv{};
    const auto depth = rng.integer(1, 4);
    for (long long d = 0; d < depth; ++d) lv[static_cast<std::size_t>(d)] = static_cast<std::uint8_t>(rng.integer(1, 3));
    const CropCode code(lv);
    t.add(code, {}, rng.bernoulli(0.05));
    t.add_count(code, rng.integer(0, 200));
  }
  t.add_count(CropCode::parse("09-00-00-00-00"), 1);
  return t;
}

long long group_total(const AggregationMap& m) {
  long long n = 0;
  for (const auto& g : m.groups) n += g.count;
  return n;
}

}  // namespace

TEST(CropCode, ParsesAndPrints) {
  const auto c = CropCode::parse("03-01-02-00-00");
  EXPECT_EQ(c.depth(), 3u);
  EXPECT_EQ(c.str(), "03-01-02-00-00");
  EXPECT_EQ(c.parent().str(), "03-01-00-00-00");
  EXPECT_TRUE(c.parent().is_ancestor_of(c));
  EXPECT_TRUE(CropCode::root().is_ancestor_of(c));
  EXPECT_FALSE(c.is_ancestor_of(c));
  EXPECT_TRUE(CropCode::parse("00-00-00-00-00").is_root());
  EXPECT_THROW(CropCode::root().parent(), InputError);
}

TEST(CropCode, RejectsMalformedText) {
  for (const char* bad : {"03-01-02-00", "03-01-02-00-00-00", "3-01-02-00-00", "03_01-02-00-00", "03-0a-02-00-00",
                          "03-00-02-00-00", ""})
    EXPECT_THROW(CropCode::parse(bad), InputError) << bad;
}

TEST(TaxonomyTree, AddCreatesAncestorsAndCountsSubtrees) {
  TaxonomyTree t;
  t.add(CropCode::parse("01-02-03-00-00"), "leaf");
  t.add_count(CropCode::parse("01-02-03-00-00"), 5);
  t.add_count(CropCode::parse("01-02-00-00-00"), 2);
  EXPECT_TRUE(t.contains(CropCode::parse("01-00-00-00-00")));
  EXPECT_EQ(t.size(), 4u);
  EXPECT_EQ(t.subtree_count(CropCode::parse("01-00-00-00-00")), 7);
  EXPECT_EQ(t.display_name(CropCode::parse("01-02-03-00-00")), "leaf");
  EXPECT_EQ(t.display_name(CropCode::parse("01-02-00-00-00")), "01-02-00-00-00");
}

TEST(Aggregation, MatchesHandSimulatedMerges) {
  for (const auto& m : fixtures::merge_cases()) {
    const auto got = aggregate_labels_absolute(fixtures::build(m), m.threshold);
    EXPECT_EQ(fixtures::compare(m, got), "");
  }
}

TEST(Aggregation, FractionalThresholdScalesWithTheTotal) {
  TaxonomyTree t;
  t.add_count(CropCode::parse("01-00-00-00-00"), 997);
  t.add_count(CropCode::parse("02-00-00-00-00"), 3);
  // 0.003 * 1000 = 3: the tie is retained.
  EXPECT_EQ(aggregate_labels(t).groups.size(), 2u);
  EXPECT_EQ(aggregate_labels(t, 0.004).groups.back().id, kOthersGroup);
  EXPECT_THROW(aggregate_labels(t, 0.0), InputError);
  EXPECT_THROW(aggregate_labels(t, 1.0), InputError);
  EXPECT_THROW(aggregate_labels(TaxonomyTree{}), InputError);
}

TEST(Aggregation, ConservesMassAndRespectsTheThreshold) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto t = random_tree(rng);
    const double th = rng.uniform(1, 300);
    const auto m = aggregate_labels_absolute(t, th);
    EXPECT_EQ(group_total(m), t.total_count());
    for (const auto& g : m.groups)
      if (g.kind == GroupKind::Retained) {
        EXPECT_GE(static_cast<double>(g.count), th);
      }
    for (const auto& [code, node] : t.nodes()) EXPECT_TRUE(m.code_to_group.count(code.str())) << code;
    // Every code's mass lands in the group it is mapped to.
    std::map<std::string, long long> via_map;
    for (const auto& [code, node] : t.nodes()) via_map[m.group_of(code.str())] += node.count;
    for (const auto& g : m.groups) EXPECT_EQ(via_map[g.id], g.count) << g.id;
  }
}

TEST(Aggregation, RaisingTheThresholdNeverAddsGroups) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = random_tree(rng);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double th : {1.0, 5.0, 20.0, 60.0, 150.0, 400.0, 1e4}) {
      const auto m = aggregate_labels_absolute(t, th);
      std::size_t retained = 0;
      for (const auto& g : m.groups) retained += g.kind == GroupKind::Retained;
      EXPECT_LE(retained, prev);
      prev = retained;
    }
  }
}

// Re-aggregating the group counts with the same threshold reproduces them.
TEST(Aggregation, IsIdempotent) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = random_tree(rng);
    const double th = rng.uniform(1, 300);
    const auto first = aggregate_labels_absolute(t, th);
    TaxonomyTree again;
    for (const auto& g : first.groups) {
      const CropCode code = g.kind == GroupKind::Others ? CropCode::root() : CropCode::parse(g.id);
      if (!code.is_root()) again.add(code, {}, g.kind == GroupKind::Permanent);
      again.add_count(code, g.count);
    }
    const auto second = aggregate_labels_absolute(again, th);
    ASSERT_EQ(second.groups.size(), first.groups.size());
    for (std::size_t i = 0; i < first.groups.size(); ++i) {
      EXPECT_EQ(second.groups[i].id, first.groups[i].id);
      EXPECT_EQ(second.groups[i].count, first.groups[i].count);
    }
  }
}

TEST(Aggregation, AllLeavesAboveThresholdIsTheIdentity) {
  TaxonomyTree t;
  for (const char* c : {"01-01-00-00-00", "01-02-00-00-00", "02-01-01-00-00"}) t.add_count(CropCode::parse(c), 50);
  const auto m = aggregate_labels_absolute(t, 50);
  for (const char* c : {"01-01-00-00-00", "01-02-00-00-00", "02-01-01-00-00"}) EXPECT_EQ(m.group_of(c), c);
  EXPECT_EQ(m.groups.size(), 3u);
}

TEST(Aggregation, ProjectionSendsUnknownCodesToOthers) {
  const auto& m = fixtures::merge_cases()[1];
  const auto map = aggregate_labels_absolute(fixtures::build(m), m.threshold);
  const std::vector<std::string> labels{"01-01-00-00-00", "01-03-00-00-00", "77-00-00-00-00"};
  EXPECT_EQ(project_labels(labels, map),
            (std::vector<std::string>{"01-00-00-00-00", "01-03-00-00-00", kOthersGroup}));
}

TEST(TaxonomyFiles, RoundTrip) {
  TaxonomyTree t;
  t.add(CropCode::parse("03-00-00-00-00"), "Permanent crops", true);
  t.add(CropCode::parse("01-01-00-00-00"), "Wheat");
  std::stringstream ss;
  write_taxonomy(ss, t);
  const auto back = read_taxonomy(ss);
  ASSERT_EQ(back.size(), t.size());
  EXPECT_TRUE(back.node(CropCode::parse("03-00-00-00-00")).permanent);
  EXPECT_EQ(back.display_name(CropCode::parse("01-01-00-00-00")), "Wheat");

  t.add_count(CropCode::parse("01-01-00-00-00"), 10);
  const auto map = aggregate_labels_absolute(t, 5);
  std::stringstream ms;
  write_aggregation(ms, map);
  const auto map2 = read_aggregation(ms);
  EXPECT_EQ(map2.code_to_group, map.code_to_group);
}

TEST(TaxonomyFiles, ErrorsCarryLineNumbers) {
  std::stringstream ss("code,name,permanent_flag\n01-00-00-00-00,a,0\n01-0x-00-00-00,b,0\n");
  try {
    read_taxonomy(ss);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  std::stringstream flag("code,name,permanent_flag\n01-00-00-00-00,a,2\n");
  EXPECT_THROW(read_taxonomy(flag), ParseError);
}

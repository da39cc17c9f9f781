#pragma once

// Hand-simulated label-merge fixtures: small code trees whose aggregation was
// worked out on paper, one rule per fixture.

#include <map>
#include <string>
#include <vector>

#include "cropnet/taxonomy.hpp"

namespace fixtures {

struct Leaf {
  const char* code;
  long long count;
  bool permanent = false;
};

struct MergeCase {
  const char* name;
  std::vector<Leaf> leaves;
  double threshold;
  std::map<std::string, long long> groups;             // id -> count
  std::map<std::string, std::string> code_to_group;    // every non-root code
};

inline cropnet::TaxonomyTree build(const MergeCase& m) {
  cropnet::TaxonomyTree t;
  for (const auto& l : m.leaves) {
    const auto code = cropnet::CropCode::parse(l.code);
    t.add(code, {}, l.permanent);
    t.add_count(code, l.count);
  }
  return t;
}

inline const std::vector<MergeCase>& merge_cases() {
  static const std::vector<MergeCase> cases{
      // Every leaf clears the threshold: identity on leaves, the empty
      // intermediate node is absorbed by "others" but carries no mass.
      {"identity",
       {{"01-01-00-00-00", 10}, {"01-02-00-00-00", 20}},
       5,
       {{"01-01-00-00-00", 10}, {"01-02-00-00-00", 20}},
       {{"01-00-00-00-00", "others"}, {"01-01-00-00-00", "01-01-00-00-00"}, {"01-02-00-00-00", "01-02-00-00-00"}}},

      // Two small siblings pool into their parent (3 + 4 = 7 >= 6); the large
      // sibling stays on its own and does not add to the parent.
      {"siblings_pool_into_parent",
       {{"01-01-00-00-00", 3}, {"01-02-00-00-00", 4}, {"01-03-00-00-00", 10}},
       6,
       {{"01-00-00-00-00", 7}, {"01-03-00-00-00", 10}},
       {{"01-00-00-00-00", "01-00-00-00-00"},
        {"01-01-00-00-00", "01-00-00-00-00"},
        {"01-02-00-00-00", "01-00-00-00-00"},
        {"01-03-00-00-00", "01-03-00-00-00"}}},

      // Mass cascades through two levels without reaching 5 and ends in
      // "others" together with a small top-level class (2 + 1 + 1 = 4).
      {"cascade_to_others",
       {{"01-01-01-00-00", 2}, {"01-01-02-00-00", 1}, {"02-00-00-00-00", 1}, {"03-01-00-00-00", 50}},
       5,
       {{"03-01-00-00-00", 50}, {"others", 4}},
       {{"01-00-00-00-00", "others"},
        {"01-01-00-00-00", "others"},
        {"01-01-01-00-00", "others"},
        {"01-01-02-00-00", "others"},
        {"02-00-00-00-00", "others"},
        {"03-00-00-00-00", "others"},
        {"03-01-00-00-00", "03-01-00-00-00"}}},

      // Permanent subtrees collapse first, whatever their counts: 05 takes
      // 1 + 100, the nested permanent 02-03 keeps 2 below threshold; 01-01
      // (9 < 10) drops to "others".
      {"permanent_subtrees_collapse",
       {{"05-00-00-00-00", 0, true},
        {"05-01-00-00-00", 1},
        {"05-02-00-00-00", 100},
        {"02-03-00-00-00", 0, true},
        {"02-03-01-00-00", 2},
        {"01-01-00-00-00", 9}},
       10,
       {{"05-00-00-00-00", 101}, {"02-03-00-00-00", 2}, {"others", 9}},
       {{"01-00-00-00-00", "others"},
        {"01-01-00-00-00", "others"},
        {"02-00-00-00-00", "others"},
        {"02-03-00-00-00", "02-03-00-00-00"},
        {"02-03-01-00-00", "02-03-00-00-00"},
        {"05-00-00-00-00", "05-00-00-00-00"},
        {"05-01-00-00-00", "05-00-00-00-00"},
        {"05-02-00-00-00", "05-00-00-00-00"}}},

      // Ties at the threshold are retained; an internal node's own count pools
      // with its small child (4 + 2 = 6) but not with its retained child.
      {"ties_and_internal_counts",
       {{"01-00-00-00-00", 4}, {"01-01-00-00-00", 2}, {"01-02-00-00-00", 6}, {"02-01-00-00-00", 5}},
       6,
       {{"01-00-00-00-00", 6}, {"01-02-00-00-00", 6}, {"others", 5}},
       {{"01-00-00-00-00", "01-00-00-00-00"},
        {"01-01-00-00-00", "01-00-00-00-00"},
        {"01-02-00-00-00", "01-02-00-00-00"},
        {"02-00-00-00-00", "others"},
        {"02-01-00-00-00", "others"}}},
  };
  return cases;
}

// Empty string when the aggregation equals the hand-simulated result,
// otherwise a description of the first difference.
inline std::string compare(const MergeCase& m, const cropnet::AggregationMap& got) {
  std::map<std::string, long long> groups;
  for (const auto& g : got.groups) groups[g.id] = g.count;
  if (groups != m.groups) return std::string(m.name) + ": group counts differ";
  for (const auto& [code, group] : got.code_to_group) {
    if (code == cropnet::CropCode::root().str()) {
      if (group != cropnet::kOthersGroup) return std::string(m.name) + ": root not mapped to others";
      continue;
    }
    auto it = m.code_to_group.find(code);
    if (it == m.code_to_group.end()) return std::string(m.name) + ": unexpected code " + code;
    if (it->second != group) return std::string(m.name) + ": " + code + " -> " + group + ", expected " + it->second;
  }
  if (got.code_to_group.size() != m.code_to_group.size() + 1) return std::string(m.name) + ": mapping size differs";
  return {};
}

}  // namespace fixtures

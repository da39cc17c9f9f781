#pragma once

// Hierarchical crop codes ("LL-LL-LL-LL-LL") and threshold-driven label
// aggregation over the code tree.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cropnet/csv.hpp"
#include "cropnet/error.hpp"

namespace cropnet {

class CropCode {
 public:
  static constexpr std::size_t kLevels = 5;

  constexpr CropCode() = default;
  explicit constexpr CropCode(std::array<std::uint8_t, kLevels> levels) : levels_(levels) {}

  static CropCode root() { return CropCode{}; }

  static CropCode parse(std::string_view text) {
    std::array<std::uint8_t, kLevels> lv{};
    std::size_t pos = 0;
    for (std::size_t i = 0; i < kLevels; ++i) {
      if (i > 0) {
        if (pos >= text.size() || text[pos] != '-')
          throw InputError("malformed crop code '" + std::string(text) + "': expected '-' at offset " + std::to_string(pos));
        ++pos;
      }
      const auto token = text.substr(pos, 2);
      if (token.size() != 2 || !std::isdigit(static_cast<unsigned char>(token[0])) ||
          !std::isdigit(static_cast<unsigned char>(token[1])))
        throw InputError("malformed crop code '" + std::string(text) + "': bad token '" + std::string(token) + "'");
      lv[i] = static_cast<std::uint8_t>((token[0] - '0') * 10 + (token[1] - '0'));
      pos += 2;
    }
    if (pos != text.size())
      throw InputError("malformed crop code '" + std::string(text) + "': trailing '" + std::string(text.substr(pos)) + "'");
    bool zero_seen = false;
    for (std::size_t i = 0; i < kLevels; ++i) {
      if (lv[i] == 0) zero_seen = true;
      else if (zero_seen)
        throw InputError("malformed crop code '" + std::string(text) + "': nonzero level " + std::to_string(i + 1) +
                         " below a zero level");
    }
    return CropCode(lv);
  }

  // Number of nonzero leading levels; 0 for the root.
  constexpr std::size_t depth() const {
    std::size_t d = 0;
    while (d < kLevels && levels_[d] != 0) ++d;
    return d;
  }

  constexpr bool is_root() const { return depth() == 0; }

  CropCode parent() const {
    if (is_root()) throw InputError("root has no parent");
    auto lv = levels_;
    lv[depth() - 1] = 0;
    return CropCode(lv);
  }

  // True when `other` lies strictly below this code.
  bool is_ancestor_of(const CropCode& other) const {
    const std::size_t d = depth();
    if (other.depth() <= d) return false;
    for (std::size_t i = 0; i < d; ++i)
      if (levels_[i] != other.levels_[i]) return false;
    return true;
  }

  constexpr std::uint8_t level(std::size_t i) const { return levels_[i]; }
  constexpr const std::array<std::uint8_t, kLevels>& levels() const { return levels_; }

  std::string str() const {
    std::string s;
    s.reserve(14);
    for (std::size_t i = 0; i < kLevels; ++i) {
      if (i) s.push_back('-');
      s.push_back(static_cast<char>('0' + levels_[i] / 10));
      s.push_back(static_cast<char>('0' + levels_[i] % 10));
    }
    return s;
  }

  auto operator<=>(const CropCode&) const = default;

 private:
  std::array<std::uint8_t, kLevels> levels_{};
};

inline std::ostream& operator<<(std::ostream& os, const CropCode& c) { return os << c.str(); }

struct TaxonNode {
  CropCode code;
  std::string name;
  bool permanent = false;
  long long count = 0;  // FOIs labelled with exactly this code
  std::vector<CropCode> children;
};

class TaxonomyTree {
 public:
  TaxonomyTree() { nodes_.emplace(CropCode::root(), TaxonNode{CropCode::root(), "root", false, 0, {}}); }

  // Inserts a node, creating missing ancestors with empty names.
  TaxonNode& add(const CropCode& code, std::string name = {}, bool permanent = false) {
    TaxonNode& node = ensure(code);
    if (!name.empty()) node.name = std::move(name);
    node.permanent = node.permanent || permanent;
    return node;
  }

  void add_count(const CropCode& code, long long n) { ensure(code).count += n; }

  void clear_counts() {
    for (auto& [code, node] : nodes_) node.count = 0;
  }

  bool contains(const CropCode& code) const { return nodes_.count(code) != 0; }
  const TaxonNode& node(const CropCode& code) const {
    auto it = nodes_.find(code);
    if (it == nodes_.end()) throw InputError("unknown taxonomy node " + code.str());
    return it->second;
  }
  const std::map<CropCode, TaxonNode>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  long long total_count() const {
    long long n = 0;
    for (const auto& [code, node] : nodes_) n += node.count;
    return n;
  }

  // Sum of counts over the node and its whole subtree.
  long long subtree_count(const CropCode& code) const {
    long long n = node(code).count;
    for (const auto& c : node(code).children) n += subtree_count(c);
    return n;
  }

  // Topmost node carrying the permanent flag on the path to `code`, if any.
  std::optional<CropCode> permanent_root(const CropCode& code) const {
    std::optional<CropCode> found;
    for (CropCode c = code;; c = c.parent()) {
      auto it = nodes_.find(c);
      if (it != nodes_.end() && it->second.permanent) found = c;
      if (c.is_root()) break;
    }
    return found;
  }

  std::string display_name(const CropCode& code) const {
    auto it = nodes_.find(code);
    return it == nodes_.end() || it->second.name.empty() ? code.str() : it->second.name;
  }

 private:
  TaxonNode& ensure(const CropCode& code) {
    auto it = nodes_.find(code);
    if (it != nodes_.end()) return it->second;
    TaxonNode& parent = ensure(code.parent());
    parent.children.push_back(code);
    std::sort(parent.children.begin(), parent.children.end());
    return nodes_.emplace(code, TaxonNode{code, {}, false, 0, {}}).first->second;
  }

  std::map<CropCode, TaxonNode> nodes_;
};

// ---------------------------------------------------------------------------
// Aggregation

inline const std::string kOthersGroup = "others";

enum class GroupKind { Retained, Permanent, Others };

struct AggregationGroup {
  std::string id;  // code string, or "others"
  std::string name;
  long long count = 0;
  GroupKind kind = GroupKind::Retained;
};

struct AggregationMap {
  double threshold = 0;
  std::vector<AggregationGroup> groups;
  std::map<std::string, std::string> code_to_group;  // every tree code

  // Unknown codes fall into "others".
  const std::string& group_of(const std::string& code) const {
    auto it = code_to_group.find(code);
    return it == code_to_group.end() ? kOthersGroup : it->second;
  }

  const AggregationGroup* find_group(const std::string& id) const {
    for (const auto& g : groups)
      if (g.id == id) return &g;
    return nullptr;
  }

  std::vector<std::string> group_ids() const {
    std::vector<std::string> ids;
    for (const auto& g : groups) ids.push_back(g.id);
    return ids;
  }
};

// Bottom-up merge: a node whose pooled mass (own count plus the mass of
// children that did not reach the threshold) is >= threshold becomes a group;
// otherwise the mass moves to its parent. Retained children do not contribute
// to the parent's pool. Permanent-crop subtrees collapse into one group up
// front, and whatever reaches the root becomes "others".
inline AggregationMap aggregate_labels_absolute(const TaxonomyTree& tree, double threshold) {
  AggregationMap out;
  out.threshold = threshold;

  std::set<CropCode> handled;
  for (const auto& [code, node] : tree.nodes()) {
    if (code.is_root() || !node.permanent) continue;
    if (tree.permanent_root(code) != code) continue;
    AggregationGroup g{code.str(), tree.display_name(code), tree.subtree_count(code), GroupKind::Permanent};
    for (const auto& [c, n] : tree.nodes())
      if (c == code || code.is_ancestor_of(c)) {
        out.code_to_group[c.str()] = g.id;
        handled.insert(c);
      }
    if (g.count > 0) out.groups.push_back(std::move(g));
  }

  std::vector<CropCode> order;
  for (const auto& [code, node] : tree.nodes())
    if (!code.is_root() && !handled.count(code)) order.push_back(code);
  std::stable_sort(order.begin(), order.end(),
                   [](const CropCode& a, const CropCode& b) { return a.depth() > b.depth(); });

  std::map<CropCode, long long> pending;
  std::map<CropCode, std::vector<CropCode>> members;
  for (const auto& code : order) {
    long long mass = tree.node(code).count + pending[code];
    auto& mem = members[code];
    mem.push_back(code);
    if (mass > 0 && static_cast<double>(mass) >= threshold) {
      AggregationGroup g{code.str(), tree.display_name(code), mass, GroupKind::Retained};
      for (const auto& m : mem) out.code_to_group[m.str()] = g.id;
      out.groups.push_back(std::move(g));
    } else {
      const CropCode up = code.parent();
      pending[up] += mass;
      auto& dst = members[up];
      dst.insert(dst.end(), mem.begin(), mem.end());
    }
    members.erase(code);
  }

  const CropCode root = CropCode::root();
  const long long residual = tree.node(root).count + pending[root];
  for (const auto& m : members[root]) out.code_to_group[m.str()] = kOthersGroup;
  out.code_to_group[root.str()] = kOthersGroup;
  if (residual > 0) out.groups.push_back({kOthersGroup, kOthersGroup, residual, GroupKind::Others});

  std::sort(out.groups.begin(), out.groups.end(), [](const AggregationGroup& a, const AggregationGroup& b) {
    if ((a.kind == GroupKind::Others) != (b.kind == GroupKind::Others)) return b.kind == GroupKind::Others;
    return a.id < b.id;
  });
  return out;
}

inline AggregationMap aggregate_labels(const TaxonomyTree& tree, double threshold_fraction = 0.003) {
  if (!(threshold_fraction > 0 && threshold_fraction < 1)) throw InputError("threshold fraction must lie in (0, 1)");
  const long long n = tree.total_count();
  if (tree.size() <= 1 || n == 0) throw InputError("empty taxonomy tree");
  return aggregate_labels_absolute(tree, threshold_fraction * static_cast<double>(n));
}

inline std::vector<std::string> project_labels(std::span<const std::string> labels, const AggregationMap& map) {
  std::vector<std::string> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(map.group_of(l));
  return out;
}

// ---------------------------------------------------------------------------
// Files

inline constexpr std::string_view kTaxonomyHeader = "code,name,permanent_flag";
inline constexpr std::string_view kAggregationHeader = "leaf_code,group_code,group_name";

inline TaxonomyTree read_taxonomy(std::istream& in) {
  TaxonomyTree tree;
  csv::read(in, kTaxonomyHeader, [&](const csv::Row& row) {
    CropCode code;
    try {
      code = CropCode::parse(row.field(0));
    } catch (const InputError& e) {
      throw ParseError(e.what(), row.line());
    }
    const auto flag = row.integer(2);
    if (flag != 0 && flag != 1) throw ParseError("permanent_flag must be 0 or 1", row.line());
    tree.add(code, row.str(1), flag == 1);
  });
  return tree;
}

inline void write_taxonomy(std::ostream& os, const TaxonomyTree& tree) {
  os << kTaxonomyHeader << '\n';
  for (const auto& [code, node] : tree.nodes()) {
    if (code.is_root()) continue;
    os << code.str() << ',' << node.name << ',' << (node.permanent ? 1 : 0) << '\n';
  }
}

inline void write_aggregation(std::ostream& os, const AggregationMap& map) {
  os << kAggregationHeader << '\n';
  for (const auto& [code, group] : map.code_to_group) {
    const auto* g = map.find_group(group);
    os << code << ',' << group << ',' << (g ? g->name : group) << '\n';
  }
}

inline AggregationMap read_aggregation(std::istream& in) {
  AggregationMap map;
  std::map<std::string, std::string> names;
  csv::read(in, kAggregationHeader, [&](const csv::Row& row) {
    map.code_to_group[row.str(0)] = row.str(1);
    names[row.str(1)] = row.str(2);
  });
  for (const auto& [id, name] : names)
    map.groups.push_back({id, name, 0, id == kOthersGroup ? GroupKind::Others : GroupKind::Retained});
  return map;
}

}  // namespace cropnet

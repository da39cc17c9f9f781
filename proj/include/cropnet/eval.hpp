#pragma once

// Metrics at four aggregation levels, confusion matrices and early-season
// cutoff curves.

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropnet/csv.hpp"
#include "cropnet/ingest.hpp"
#include "cropnet/pipeline.hpp"
#include "cropnet/taxonomy.hpp"

namespace cropnet {

// ---------------------------------------------------------------------------
// Levels

enum class Level { All, Aggregated, Interest, InterestOnly };

inline constexpr std::array<Level, 4> kAllLevels{Level::All, Level::Aggregated, Level::Interest, Level::InterestOnly};

inline std::string_view to_string(Level l) {
  switch (l) {
    case Level::All: return "all";
    case Level::Aggregated: return "aggregated";
    case Level::Interest: return "coi";
    case Level::InterestOnly: return "coi-only";
  }
  return "?";
}

inline Level parse_level(std::string_view s) {
  for (Level l : kAllLevels)
    if (to_string(l) == s) return l;
  throw InputError("unknown level '" + std::string(s) + "'; valid levels: all, aggregated, coi, coi-only");
}

inline const std::string kGrasslandGroup = "grassland";

// How leaf codes are projected at each level. Crops of interest and grassland
// are lists of aggregated group ids.
struct LevelSpec {
  AggregationMap aggregation;
  std::set<std::string> interest;
  std::set<std::string> grassland;

  std::string project(const std::string& leaf, Level level) const {
    if (level == Level::All) return leaf;
    const std::string& group = aggregation.group_of(leaf);
    if (level == Level::Aggregated) return group;
    if (interest.count(group)) return group;
    if (grassland.count(group)) return kGrasslandGroup;
    return kOthersGroup;
  }
};

// Aggregation map from the label counts of one season (the validation season
// in experiments, so the test season never shapes the classes).
inline AggregationMap aggregation_for(const Dataset& ds, int season, double threshold_fraction = 0.003) {
  TaxonomyTree tree = ds.taxonomy ? *ds.taxonomy : TaxonomyTree{};
  tree.clear_counts();
  for (const auto& p : ds.parcels)
    if (const auto* rec = p.season(season)) tree.add_count(CropCode::parse(rec->crop), 1);
  return aggregate_labels(tree, threshold_fraction);
}

// ---------------------------------------------------------------------------
// Metrics

struct ClassScore {
  std::string cls;
  std::size_t tp = 0, fp = 0, fn = 0, support = 0;
  double precision = 0, recall = 0, f1 = 0;
};

struct LevelMetrics {
  Level level = Level::All;
  std::size_t samples = 0;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  double accuracy = 0;  // all levels but coi-only
  double micro_f1 = 0;  // pooled over the level's class set
  std::vector<ClassScore> classes;
};

inline double safe_ratio(double a, double b) { return b > 0 ? a / b : 0.0; }
inline double f1_of(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

// Scores already-projected labels. Macro averages run over classes present in
// truth or predictions; when `subset` is given, samples whose truth lies
// outside it are dropped and only subset classes are scored.
inline LevelMetrics score_labels(std::span<const std::string> truth, std::span<const std::string> pred,
                                 const std::set<std::string>* subset = nullptr) {
  if (truth.size() != pred.size()) throw ShapeError("truth and predictions differ in length");
  std::map<std::string, ClassScore> per;
  LevelMetrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (subset && !subset->count(truth[i])) continue;
    ++m.samples;
    auto& t = per[truth[i]];
    ++t.support;
    if (truth[i] == pred[i]) {
      ++t.tp;
      ++correct;
    } else {
      ++t.fn;
      if (!subset || subset->count(pred[i])) ++per[pred[i]].fp;
    }
  }
  if (m.samples == 0) throw InputError("empty evaluation set");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (auto& [cls, s] : per) {
    s.cls = cls;
    s.precision = safe_ratio(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fp));
    s.recall = safe_ratio(static_cast<double>(s.tp), static_cast<double>(s.tp + s.fn));
    s.f1 = f1_of(s.precision, s.recall);
    m.macro_precision += s.precision;
    m.macro_recall += s.recall;
    m.macro_f1 += s.f1;
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
    m.classes.push_back(s);
  }
  const double k = static_cast<double>(per.size());
  m.macro_precision /= k;
  m.macro_recall /= k;
  m.macro_f1 /= k;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.samples);
  m.micro_f1 = safe_ratio(2.0 * static_cast<double>(tp), static_cast<double>(2 * tp + fp + fn));
  return m;
}

inline LevelMetrics compute_metrics(std::span<const std::string> truth, std::span<const std::string> pred,
                                    const LevelSpec& spec, Level level) {
  if (truth.size() != pred.size()) throw ShapeError("truth and predictions differ in length");
  std::vector<std::string> t, p;
  t.reserve(truth.size());
  p.reserve(pred.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    t.push_back(spec.project(truth[i], level));
    p.push_back(spec.project(pred[i], level));
  }
  LevelMetrics m = score_labels(t, p, level == Level::InterestOnly ? &spec.interest : nullptr);
  m.level = level;
  return m;
}

struct MetricsReport {
  std::vector<LevelMetrics> levels;

  const LevelMetrics& at(Level l) const {
    for (const auto& m : levels)
      if (m.level == l) return m;
    throw InputError("level " + std::string(to_string(l)) + " not in report");
  }
};

inline MetricsReport compute_report(std::span<const std::string> truth, std::span<const std::string> pred,
                                    const LevelSpec& spec) {
  MetricsReport r;
  for (Level l : kAllLevels) r.levels.push_back(compute_metrics(truth, pred, spec, l));
  return r;
}

inline constexpr std::string_view kMetricsHeader = "level,samples,macro_precision,macro_recall,macro_f1,accuracy,micro_f1";

// Accuracy is left empty at the coi-only level, micro-F1 is reported only there.
inline void write_metrics_row(std::ostream& os, const LevelMetrics& m) {
  os << to_string(m.level) << ',' << m.samples << ',' << csv::format(m.macro_precision) << ','
     << csv::format(m.macro_recall) << ',' << csv::format(m.macro_f1) << ',';
  if (m.level != Level::InterestOnly) os << csv::format(m.accuracy);
  os << ',';
  if (m.level == Level::InterestOnly) os << csv::format(m.micro_f1);
  os << '\n';
}

inline void write_metrics(std::ostream& os, const MetricsReport& r) {
  os << kMetricsHeader << '\n';
  for (const auto& m : r.levels) write_metrics_row(os, m);
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& m : r.levels) {
    nlohmann::json e{{"samples", m.samples},
                     {"macro_precision", m.macro_precision},
                     {"macro_recall", m.macro_recall},
                     {"macro_f1", m.macro_f1}};
    if (m.level == Level::InterestOnly) e["micro_f1"] = m.micro_f1;
    else e["accuracy"] = m.accuracy;
    j[std::string(to_string(m.level))] = e;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Confusion matrix: true class by row, predicted class by column.

struct ConfusionMatrix {
  std::vector<std::string> classes;
  std::vector<std::vector<long long>> counts;

  long long total() const {
    long long n = 0;
    for (const auto& r : counts)
      for (long long c : r) n += c;
    return n;
  }

  // Percentages over each predicted column, so the diagonal is per-class
  // precision (x100). Columns without predictions stay zero.
  std::vector<std::vector<double>> normalized() const {
    const std::size_t k = classes.size();
    std::vector<std::vector<double>> out(k, std::vector<double>(k, 0.0));
    for (std::size_t c = 0; c < k; ++c) {
      long long col = 0;
      for (std::size_t r = 0; r < k; ++r) col += counts[r][c];
      if (col == 0) continue;
      for (std::size_t r = 0; r < k; ++r) out[r][c] = 100.0 * static_cast<double>(counts[r][c]) / static_cast<double>(col);
    }
    return out;
  }
};

inline ConfusionMatrix confusion(std::span<const std::string> truth, std::span<const std::string> pred,
                                 std::vector<std::string> classes) {
  if (truth.size() != pred.size()) throw ShapeError("truth and predictions differ in length");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < classes.size(); ++i)
    if (!index.emplace(classes[i], i).second) throw InputError("duplicate class " + classes[i]);
  ConfusionMatrix cm;
  cm.counts.assign(classes.size(), std::vector<long long>(classes.size(), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = index.find(truth[i]);
    const auto p = index.find(pred[i]);
    if (t == index.end() || p == index.end())
      throw InputError("label outside the class set: " + (t == index.end() ? truth[i] : pred[i]));
    ++cm.counts[t->second][p->second];
  }
  cm.classes = std::move(classes);
  return cm;
}

template <typename Cell>
void write_matrix(std::ostream& os, const std::vector<std::string>& classes, const std::vector<std::vector<Cell>>& m) {
  os << "true\\pred";
  for (const auto& c : classes) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < classes.size(); ++r) {
    os << classes[r];
    for (const auto& v : m[r]) {
      if constexpr (std::is_floating_point_v<Cell>) os << ',' << csv::format(v);
      else os << ',' << v;
    }
    os << '\n';
  }
}

inline void write_confusion(std::ostream& os, const ConfusionMatrix& cm) { write_matrix(os, cm.classes, cm.counts); }
inline void write_confusion_normalized(std::ostream& os, const ConfusionMatrix& cm) {
  write_matrix(os, cm.classes, cm.normalized());
}

// ---------------------------------------------------------------------------
// Early-season curves

inline std::vector<std::string> codes_of(const CropVocab& vocab, std::span<const int> indices) {
  std::vector<std::string> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(vocab.code(static_cast<std::size_t>(i)));
  return out;
}

struct CurvePoint {
  std::size_t cutoff = 0;
  MetricsReport report;
};

// Evaluates the model with every season's RS sequence truncated to each cutoff.
inline std::vector<CurvePoint> early_season_curve(const Model& model, const PreparedData& d,
                                                  std::span<const Sample> samples, const LevelSpec& spec,
                                                  std::span<const std::size_t> cutoffs, std::size_t max_history = 0) {
  const auto truth = codes_of(d.vocab, sample_labels(d, samples));
  std::vector<CurvePoint> out;
  for (std::size_t t : cutoffs) {
    if (t < 1 || t > kNumWindows) throw InputError("cutoff must be in 1..24");
    const auto pred = codes_of(d.vocab, predict_samples(model, d, samples, BatchOptions{t, max_history}));
    out.push_back({t, compute_report(truth, pred, spec)});
  }
  return out;
}

inline std::vector<std::size_t> default_cutoffs() {
  std::vector<std::size_t> c;
  for (std::size_t t = 10; t <= kNumWindows; ++t) c.push_back(t);
  return c;
}

inline constexpr std::string_view kCurveHeader = "cutoff,level,class,support,precision,recall,f1";

// One row per (cutoff, level, class) plus a "*" row carrying the level's
// accuracy (or micro-F1 at coi-only) in the f1 column.
inline void write_curve(std::ostream& os, std::span<const CurvePoint> curve) {
  os << kCurveHeader << '\n';
  for (const auto& pt : curve)
    for (const auto& m : pt.report.levels) {
      const double overall = m.level == Level::InterestOnly ? m.micro_f1 : m.accuracy;
      os << pt.cutoff << ',' << to_string(m.level) << ",*," << m.samples << ",,," << csv::format(overall) << '\n';
      for (const auto& c : m.classes)
        os << pt.cutoff << ',' << to_string(m.level) << ',' << c.cls << ',' << c.support << ','
           << csv::format(c.precision) << ',' << csv::format(c.recall) << ',' << csv::format(c.f1) << '\n';
    }
}

}  // namespace cropnet

#pragma once

// Fixed-size modality inputs: windowed statistical functionals of the
// smoothed RS series, crop one-hot / vocabulary, and the local crop
// distribution around a parcel.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cropnet/error.hpp"
#include "cropnet/signal.hpp"

namespace cropnet {

inline constexpr int kWindowDays = 30;
inline constexpr int kWindowStepDays = 15;
inline constexpr std::size_t kNumWindows = 24;
inline constexpr std::size_t kNumFunctionals = 7;
inline constexpr std::size_t kWindowFeatures = kNumVariables * kNumFunctionals;              // 28
inline constexpr std::size_t kSeasonFeatureLength = kNumVariables * kNumWindows * kNumFunctionals;  // 672

inline constexpr std::array<std::string_view, kNumFunctionals> kFunctionalNames{"mean", "std", "min", "max",
                                                                               "median", "q1", "q3"};

// Offset of one feature in the [variable][window][functional] layout.
constexpr std::size_t feature_index(std::size_t variable, std::size_t window, std::size_t functional) {
  return (variable * kNumWindows + window) * kNumFunctionals + functional;
}

// ---------------------------------------------------------------------------
// Windowing and functionals

// Sample groups for overlapping windows [k*step, k*step + window) measured in
// days from the series start.
inline std::vector<std::vector<double>> windowize(const RegularSeries& series, int window_days = kWindowDays,
                                                  int step_days = kWindowStepDays, std::size_t n_windows = kNumWindows) {
  if (series.values.empty() || series.day(series.size() - 1) - series.start_day + series.step_days < window_days)
    throw InputError("series shorter than one window");
  std::vector<std::vector<double>> out(n_windows);
  for (std::size_t k = 0; k < n_windows; ++k) {
    const int lo = series.start_day + static_cast<int>(k) * step_days;
    const int hi = lo + window_days;
    for (std::size_t i = 0; i < series.size(); ++i)
      if (series.day(i) >= lo && series.day(i) < hi) out[k].push_back(series.values[i]);
    if (out[k].empty()) throw InputError("window " + std::to_string(k) + " holds no samples");
  }
  return out;
}

// Linear interpolation between order statistics (type 7) on sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// mean, standard deviation (population), min, max, median, q1, q3.
inline std::array<double, kNumFunctionals> functionals(std::span<const double> values) {
  if (values.empty()) throw InputError("empty window");
  std::vector<double> s(values.begin(), values.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double mean = 0;
  for (double v : s) mean += v;
  mean /= n;
  double var = 0;
  for (double v : s) var += (v - mean) * (v - mean);
  var /= n;
  return {mean, std::sqrt(var), s.front(), s.back(), quantile_sorted(s, 0.5), quantile_sorted(s, 0.25),
          quantile_sorted(s, 0.75)};
}

// ---------------------------------------------------------------------------
// Season features

struct SeasonFeatures {
  std::string foi_id;
  int season = 0;
  std::vector<double> values = std::vector<double>(kSeasonFeatureLength, 0.0);
  std::array<bool, kNumVariables> missing{};

  bool any_missing() const { return std::any_of(missing.begin(), missing.end(), [](bool m) { return m; }); }
  bool all_missing() const { return std::all_of(missing.begin(), missing.end(), [](bool m) { return m; }); }
};

// Builds the 672-vector in canonical variable order regardless of the order
// the series are given in. Absent variables leave a zero block and set their
// missing flag.
inline SeasonFeatures season_features(std::span<const RegularSeries> series) {
  SeasonFeatures out;
  out.missing.fill(true);
  for (const auto& s : series) {
    const auto v = static_cast<std::size_t>(s.variable);
    if (!out.missing[v]) throw InputError("variable " + std::string(to_string(s.variable)) + " given twice");
    const auto windows = windowize(s);
    for (std::size_t w = 0; w < kNumWindows; ++w) {
      const auto f = functionals(windows[w]);
      std::copy(f.begin(), f.end(), out.values.begin() + static_cast<std::ptrdiff_t>(feature_index(v, w, 0)));
    }
    out.missing[v] = false;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation

inline constexpr double kStdFloor = 1e-12;

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t size() const noexcept { return mean.size(); }
};

// Per-dimension z-score statistics (population standard deviation).
inline NormStats fit_norm_stats(std::span<const std::vector<double>> rows) {
  if (rows.size() < 2) throw InputError("normalisation needs at least two training rows");
  const std::size_t dim = rows.front().size();
  NormStats st{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& r : rows) {
    if (r.size() != dim) throw ShapeError("feature rows differ in length");
    for (std::size_t j = 0; j < dim; ++j) st.mean[j] += r[j];
  }
  const double n = static_cast<double>(rows.size());
  for (double& m : st.mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t j = 0; j < dim; ++j) st.std[j] += (r[j] - st.mean[j]) * (r[j] - st.mean[j]);
  for (double& s : st.std) s = std::max(std::sqrt(s / n), kStdFloor);
  return st;
}

inline void apply_norm(std::span<double> row, const NormStats& st) {
  if (row.size() != st.size()) throw ShapeError("feature row length " + std::to_string(row.size()) +
                                                " vs stats length " + std::to_string(st.size()));
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = (row[j] - st.mean[j]) / st.std[j];
}

inline void invert_norm(std::span<double> row, const NormStats& st) {
  if (row.size() != st.size()) throw ShapeError("feature row length mismatch");
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = row[j] * st.std[j] + st.mean[j];
}

// ---------------------------------------------------------------------------
// Crop vocabulary

class CropVocab {
 public:
  CropVocab() = default;

  // Lexicographically ordered, duplicates removed.
  explicit CropVocab(std::vector<std::string> codes) : codes_(std::move(codes)) {
    std::sort(codes_.begin(), codes_.end());
    codes_.erase(std::unique(codes_.begin(), codes_.end()), codes_.end());
    for (std::size_t i = 0; i < codes_.size(); ++i) index_.emplace(codes_[i], i);
  }

  std::size_t size() const noexcept { return codes_.size(); }
  const std::vector<std::string>& codes() const noexcept { return codes_; }
  const std::string& code(std::size_t i) const { return codes_.at(i); }
  bool contains(const std::string& code) const { return index_.count(code) != 0; }

  std::optional<std::size_t> find(const std::string& code) const {
    auto it = index_.find(code);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index(const std::string& code) const {
    auto it = index_.find(code);
    if (it == index_.end()) throw InputError("crop code '" + code + "' not in vocabulary");
    return it->second;
  }

  bool operator==(const CropVocab& other) const { return codes_ == other.codes_; }

 private:
  std::vector<std::string> codes_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One-hot of length V, or V + 1 with the UNKNOWN slot (last) enabled.
inline std::vector<double> crop_onehot(const std::string& code, const CropVocab& vocab, bool allow_unknown = false) {
  std::vector<double> out(vocab.size() + (allow_unknown ? 1 : 0), 0.0);
  if (auto idx = vocab.find(code)) {
    out[*idx] = 1.0;
  } else if (allow_unknown) {
    out.back() = 1.0;
  } else {
    throw InputError("crop code '" + code + "' not in vocabulary and UNKNOWN slot disabled");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local crop distribution

inline constexpr int kShareScale = 10000;  // shares are stored in units of 1e-4

struct CropDistribution {
  std::vector<std::int32_t> units;  // share * 1e4, exact
  bool empty_neighbourhood = false;

  double share(std::size_t i) const { return static_cast<double>(units[i]) / kShareScale; }

  std::vector<double> to_vector() const {
    std::vector<double> out(units.size());
    for (std::size_t i = 0; i < units.size(); ++i) out[i] = share(i);
    return out;
  }
};

struct ParcelPoint {
  double x_km = 0;
  double y_km = 0;
  double area_ha = 0;
  std::size_t crop = 0;  // vocabulary index
};

inline CropDistribution round_shares(std::span<const double> area, double total) {
  CropDistribution d;
  d.units.assign(area.size(), 0);
  if (!(total > 0)) {
    d.empty_neighbourhood = true;
    return d;
  }
  for (std::size_t i = 0; i < area.size(); ++i)
    d.units[i] = static_cast<std::int32_t>(std::llround(area[i] / total * kShareScale));
  return d;
}

// Area share of each crop among parcels whose centroid lies within radius_km
// (planar Euclidean distance, boundary inclusive) of the given centre.
inline CropDistribution crop_distribution(double x_km, double y_km, std::span<const ParcelPoint> parcels,
                                          std::size_t vocab_size, double radius_km = 10.0) {
  std::vector<double> area(vocab_size, 0.0);
  double total = 0;
  const double r2 = radius_km * radius_km;
  for (const auto& p : parcels) {
    const double dx = p.x_km - x_km, dy = p.y_km - y_km;
    if (dx * dx + dy * dy <= r2) {
      if (p.crop >= vocab_size) throw InputError("crop index out of vocabulary");
      area[p.crop] += p.area_ha;
      total += p.area_ha;
    }
  }
  return round_shares(area, total);
}

// Distribution for every parcel's own centroid, bucketed on a grid of
// radius-sized cells. Summation order matches crop_distribution (input order).
inline std::vector<CropDistribution> crop_distributions(std::span<const ParcelPoint> parcels, std::size_t vocab_size,
                                                        double radius_km = 10.0) {
  std::map<std::pair<long long, long long>, std::vector<std::size_t>> cells;
  auto cell_of = [&](double x, double y) {
    return std::pair<long long, long long>{static_cast<long long>(std::floor(x / radius_km)),
                                           static_cast<long long>(std::floor(y / radius_km))};
  };
  for (std::size_t i = 0; i < parcels.size(); ++i) cells[cell_of(parcels[i].x_km, parcels[i].y_km)].push_back(i);

  std::vector<CropDistribution> out;
  out.reserve(parcels.size());
  const double r2 = radius_km * radius_km;
  std::vector<std::size_t> hits;
  std::vector<double> area(vocab_size);
  for (const auto& p : parcels) {
    const auto [cx, cy] = cell_of(p.x_km, p.y_km);
    hits.clear();
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -1; dy <= 1; ++dy) {
        auto it = cells.find({cx + dx, cy + dy});
        if (it != cells.end()) hits.insert(hits.end(), it->second.begin(), it->second.end());
      }
    std::sort(hits.begin(), hits.end());
    std::fill(area.begin(), area.end(), 0.0);
    double total = 0;
    for (std::size_t j : hits) {
      const auto& q = parcels[j];
      const double ddx = q.x_km - p.x_km, ddy = q.y_km - p.y_km;
      if (ddx * ddx + ddy * ddy <= r2) {
        if (q.crop >= vocab_size) throw InputError("crop index out of vocabulary");
        area[q.crop] += q.area_ha;
        total += q.area_ha;
      }
    }
    out.push_back(round_shares(area, total));
  }
  return out;
}

}  // namespace cropnet

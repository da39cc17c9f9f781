#pragma once

// Dataset files and the in-memory parcel collection.
//
//   crops.csv         foi_id,season,crop_code,x_km,y_km,area_ha
//   observations.csv  foi_id,season,variable,day,value,valid
//   taxonomy.csv      code,name,permanent_flag
//
// Season n runs from Oct 1 of year n to Sep 30 of year n+1; day 0 is Oct 1.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cropnet/csv.hpp"
#include "cropnet/features.hpp"
#include "cropnet/signal.hpp"
#include "cropnet/taxonomy.hpp"

namespace cropnet {

inline constexpr std::string_view kCropsHeader = "foi_id,season,crop_code,x_km,y_km,area_ha";
inline constexpr std::string_view kObservationsHeader = "foi_id,season,variable,day,value,valid";
inline constexpr std::string_view kRegularHeaderPrefix = "foi_id,season,variable,start_day,step_days";

inline constexpr const char* kCropsFile = "crops.csv";
inline constexpr const char* kObservationsFile = "observations.csv";
inline constexpr const char* kTaxonomyFile = "taxonomy.csv";

struct SeasonRecord {
  std::string crop;
  std::array<ObservationSeries, kNumVariables> series;
  bool has_rs = false;  // false: the season's RS block is zero-padded downstream
};

struct ParcelRecord {
  std::string foi_id;
  double x_km = 0;
  double y_km = 0;
  double area_ha = 0;
  std::map<int, SeasonRecord> seasons;  // keyed by season year

  const SeasonRecord* season(int year) const {
    auto it = seasons.find(year);
    return it == seasons.end() ? nullptr : &it->second;
  }
};

struct Dataset {
  std::string country;
  std::vector<int> seasons;           // contiguous, ascending
  std::vector<ParcelRecord> parcels;  // sorted by foi_id
  std::optional<TaxonomyTree> taxonomy;

  std::size_t crop_entries() const {
    std::size_t n = 0;
    for (const auto& p : parcels) n += p.seasons.size();
    return n;
  }

  std::size_t season_index(int year) const {
    auto it = std::find(seasons.begin(), seasons.end(), year);
    if (it == seasons.end()) throw InputError("season " + std::to_string(year) + " not in dataset");
    return static_cast<std::size_t>(it - seasons.begin());
  }

  // Codes appearing in any season, sorted.
  std::vector<std::string> crop_codes() const {
    std::set<std::string> s;
    for (const auto& p : parcels)
      for (const auto& [year, rec] : p.seasons) s.insert(rec.crop);
    return {s.begin(), s.end()};
  }

  const ParcelRecord* find(const std::string& foi_id) const {
    auto it = std::lower_bound(parcels.begin(), parcels.end(), foi_id,
                               [](const ParcelRecord& p, const std::string& id) { return p.foi_id < id; });
    return it != parcels.end() && it->foi_id == foi_id ? &*it : nullptr;
  }
};

// ---------------------------------------------------------------------------
// Range checks applied to valid observations.

inline void check_observation_range(Variable v, double value, std::size_t line) {
  double lo = 0, hi = 1;
  if (v == Variable::LAI) hi = 15;
  if (!(value >= lo && value <= hi))
    throw ParseError(std::string(to_string(v)) + " value " + csv::format(value) + " outside [" + csv::format(lo) + ", " +
                         csv::format(hi) + "]",
                     line);
}

inline void read_crops(std::istream& in, Dataset& ds) {
  std::map<std::string, ParcelRecord> by_id;
  csv::read(in, kCropsHeader, [&](const csv::Row& row) {
    if (row.size() != 6) throw ParseError("expected 6 columns, got " + std::to_string(row.size()), row.line());
    const std::string id = row.str(0);
    const int season = static_cast<int>(row.integer(1));
    const std::string code = row.str(2);
    CropCode::parse(code);
    const double x = row.real(3), y = row.real(4), area = row.real(5);
    if (!std::isfinite(x) || !std::isfinite(y)) throw ParseError("non-finite coordinates for " + id, row.line());
    if (!(area > 0) || !std::isfinite(area)) throw ParseError("area must be positive for " + id, row.line());
    auto [it, fresh] = by_id.try_emplace(id);
    auto& p = it->second;
    if (fresh) {
      p.foi_id = id;
      p.x_km = x;
      p.y_km = y;
      p.area_ha = area;
    } else if (p.x_km != x || p.y_km != y || p.area_ha != area) {
      throw ParseError("inconsistent location or area for " + id, row.line());
    }
    if (!p.seasons.try_emplace(season, SeasonRecord{code, {}, false}).second)
      throw ParseError("duplicate crop row for (" + id + ", " + std::to_string(season) + ")", row.line());
  });
  ds.parcels.clear();
  for (auto& [id, p] : by_id) ds.parcels.push_back(std::move(p));
}

namespace detail {
struct ObsRow {
  int day;
  double value;
  bool valid;
  std::size_t line;
};
}  // namespace detail

inline void read_observations(std::istream& in, Dataset& ds) {
  std::map<std::tuple<std::string, int, int>, std::vector<detail::ObsRow>> rows;
  csv::read(in, kObservationsHeader, [&](const csv::Row& row) {
    if (row.size() != 6) throw ParseError("expected 6 columns, got " + std::to_string(row.size()), row.line());
    const int season = static_cast<int>(row.integer(1));
    Variable v;
    try {
      v = parse_variable(row.field(2));
    } catch (const Error& e) {
      throw ParseError(e.what(), row.line());
    }
    const long long day = row.integer(3);
    if (day < 0 || day >= kSeasonDays) throw ParseError("day " + std::to_string(day) + " outside the season", row.line());
    const double value = row.real(4);
    const long long valid = row.integer(5);
    if (valid != 0 && valid != 1) throw ParseError("valid flag must be 0 or 1", row.line());
    if (valid) check_observation_range(v, value, row.line());
    rows[{row.str(0), season, static_cast<int>(v)}].push_back({static_cast<int>(day), value, valid == 1, row.line()});
  });
  for (auto& [key, samples] : rows) {
    const auto& [id, season, var] = key;
    auto it = std::lower_bound(ds.parcels.begin(), ds.parcels.end(), id,
                               [](const ParcelRecord& p, const std::string& i) { return p.foi_id < i; });
    if (it == ds.parcels.end() || it->foi_id != id)
      throw ParseError("observations for unknown FOI " + id, samples.front().line);
    auto rec = it->seasons.find(season);
    if (rec == it->seasons.end())
      throw ParseError("observations for " + id + " in season " + std::to_string(season) + " without a crop row",
                       samples.front().line);
    std::sort(samples.begin(), samples.end(), [](const auto& a, const auto& b) { return a.day < b.day; });
    auto& series = rec->second.series[static_cast<std::size_t>(var)];
    series = ObservationSeries{};
    series.variable = static_cast<Variable>(var);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (i > 0 && samples[i].day == samples[i - 1].day)
        throw ParseError("duplicate observation day " + std::to_string(samples[i].day) + " for " + id, samples[i].line);
      series.push(samples[i].day, samples[i].value, samples[i].valid);
    }
  }
  for (auto& p : ds.parcels)
    for (auto& [year, rec] : p.seasons) {
      rec.has_rs = true;
      for (const auto& s : rec.series)
        if (s.valid_count() < 2) rec.has_rs = false;
    }
}

// Records the season range and checks contiguity.
inline void finalize_seasons(Dataset& ds) {
  std::set<int> years;
  for (const auto& p : ds.parcels)
    for (const auto& [y, rec] : p.seasons) years.insert(y);
  ds.seasons.assign(years.begin(), years.end());
  for (std::size_t i = 1; i < ds.seasons.size(); ++i)
    if (ds.seasons[i] != ds.seasons[i - 1] + 1)
      throw InputError("seasons are not contiguous: " + std::to_string(ds.seasons[i - 1]) + " then " +
                       std::to_string(ds.seasons[i]));
}

// Loads crops.csv, observations.csv (optional) and taxonomy.csv (optional) from a directory.
inline Dataset load_dataset(const std::filesystem::path& dir, std::string country = {}) {
  Dataset ds;
  ds.country = country.empty() ? dir.filename().string() : std::move(country);
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw InputError("cannot open " + p.string());
    return in;
  };
  {
    auto in = open(dir / kCropsFile);
    read_crops(in, ds);
  }
  if (std::filesystem::exists(dir / kObservationsFile)) {
    auto in = open(dir / kObservationsFile);
    read_observations(in, ds);
  }
  if (std::filesystem::exists(dir / kTaxonomyFile)) {
    auto in = open(dir / kTaxonomyFile);
    ds.taxonomy = read_taxonomy(in);
  }
  finalize_seasons(ds);
  return ds;
}

// ---------------------------------------------------------------------------

inline void write_crops(std::ostream& os, const Dataset& ds) {
  os << kCropsHeader << '\n';
  for (const auto& p : ds.parcels)
    for (const auto& [year, rec] : p.seasons)
      os << p.foi_id << ',' << year << ',' << rec.crop << ',' << csv::format(p.x_km) << ',' << csv::format(p.y_km) << ','
         << csv::format(p.area_ha) << '\n';
}

inline void write_observations(std::ostream& os, const Dataset& ds) {
  os << kObservationsHeader << '\n';
  for (const auto& p : ds.parcels)
    for (const auto& [year, rec] : p.seasons)
      for (const auto& s : rec.series)
        for (std::size_t i = 0; i < s.size(); ++i)
          os << p.foi_id << ',' << year << ',' << to_string(s.variable) << ',' << s.days[i] << ','
             << csv::format(s.values[i]) << ',' << (s.valid[i] ? 1 : 0) << '\n';
}

inline void save_dataset(const std::filesystem::path& dir, const Dataset& ds) {
  std::filesystem::create_directories(dir);
  auto open = [](const std::filesystem::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    return out;
  };
  {
    auto out = open(dir / kCropsFile);
    write_crops(out, ds);
  }
  {
    auto out = open(dir / kObservationsFile);
    write_observations(out, ds);
  }
  if (ds.taxonomy) {
    auto out = open(dir / kTaxonomyFile);
    write_taxonomy(out, *ds.taxonomy);
  }
}

// ---------------------------------------------------------------------------

inline CropVocab build_vocab(std::span<const Dataset* const> datasets) {
  if (datasets.empty()) throw InputError("build_vocab needs at least one dataset");
  std::vector<std::string> codes;
  for (const auto* ds : datasets) {
    auto c = ds->crop_codes();
    codes.insert(codes.end(), c.begin(), c.end());
  }
  return CropVocab(std::move(codes));
}

inline CropVocab build_vocab(const Dataset& ds) {
  const Dataset* one[] = {&ds};
  return build_vocab(one);
}

// ---------------------------------------------------------------------------
// Regular series CSV: foi_id,season,variable,start_day,step_days,v0..vK

inline std::string regular_header(std::size_t samples) {
  std::string h(kRegularHeaderPrefix);
  for (std::size_t i = 0; i < samples; ++i) h += ",v" + std::to_string(i);
  return h;
}

struct RegularRow {
  std::string foi_id;
  int season = 0;
  RegularSeries series;
};

inline void write_regular(std::ostream& os, std::span<const RegularRow> rows) {
  const std::size_t k = rows.empty() ? 0 : rows.front().series.size();
  os << regular_header(k) << '\n';
  for (const auto& r : rows) {
    if (r.series.size() != k) throw ShapeError("regular series rows differ in length");
    os << r.foi_id << ',' << r.season << ',' << to_string(r.series.variable) << ',' << r.series.start_day << ','
       << r.series.step_days;
    for (double v : r.series.values) os << ',' << csv::format(v);
    os << '\n';
  }
}

inline std::vector<RegularRow> read_regular(std::istream& in, std::size_t samples) {
  std::vector<RegularRow> out;
  csv::read(in, regular_header(samples), [&](const csv::Row& row) {
    if (row.size() != 5 + samples)
      throw ParseError("expected " + std::to_string(5 + samples) + " columns, got " + std::to_string(row.size()), row.line());
    RegularRow r;
    r.foi_id = row.str(0);
    r.season = static_cast<int>(row.integer(1));
    try {
      r.series.variable = parse_variable(row.field(2));
    } catch (const Error& e) {
      throw ParseError(e.what(), row.line());
    }
    r.series.start_day = static_cast<int>(row.integer(3));
    r.series.step_days = static_cast<int>(row.integer(4));
    for (std::size_t i = 0; i < samples; ++i) {
      const double v = row.real(5 + i);
      if (!std::isfinite(v)) throw ParseError("regular series must be finite", row.line());
      r.series.values.push_back(v);
    }
    out.push_back(std::move(r));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Feature CSV: foi_id,season,f0..f671

inline std::string feature_header(std::size_t n = kSeasonFeatureLength) {
  std::string h = "foi_id,season";
  for (std::size_t i = 0; i < n; ++i) h += ",f" + std::to_string(i);
  return h;
}

inline void write_features(std::ostream& os, std::span<const SeasonFeatures> rows) {
  os << feature_header() << '\n';
  for (const auto& r : rows) {
    os << r.foi_id << ',' << r.season;
    for (double v : r.values) os << ',' << csv::format(v);
    os << '\n';
  }
}

// Rows whose every value is zero are read back as fully missing.
inline std::vector<SeasonFeatures> read_features(std::istream& in) {
  std::vector<SeasonFeatures> out;
  csv::read(in, feature_header(), [&](const csv::Row& row) {
    if (row.size() != 2 + kSeasonFeatureLength)
      throw ParseError("expected " + std::to_string(2 + kSeasonFeatureLength) + " columns, got " + std::to_string(row.size()),
                       row.line());
    SeasonFeatures f;
    f.foi_id = row.str(0);
    f.season = static_cast<int>(row.integer(1));
    f.values.resize(kSeasonFeatureLength);
    for (std::size_t i = 0; i < kSeasonFeatureLength; ++i) {
      f.values[i] = row.real(2 + i);
      if (!std::isfinite(f.values[i])) throw ParseError("features must be finite", row.line());
    }
    const std::size_t block = kNumWindows * kNumFunctionals;
    for (std::size_t v = 0; v < kNumVariables; ++v)
      f.missing[v] = std::all_of(f.values.begin() + static_cast<std::ptrdiff_t>(v * block),
                                 f.values.begin() + static_cast<std::ptrdiff_t>((v + 1) * block),
                                 [](double x) { return x == 0.0; });
    out.push_back(std::move(f));
  });
  return out;
}

// Distribution CSV: foi_id,crop_code,share (zero shares omitted)
inline constexpr std::string_view kDistributionHeader = "foi_id,crop_code,share";

inline void write_distributions(std::ostream& os, std::span<const std::string> foi_ids,
                                std::span<const CropDistribution> dists, const CropVocab& vocab) {
  os << kDistributionHeader << '\n';
  for (std::size_t i = 0; i < foi_ids.size(); ++i)
    for (std::size_t c = 0; c < vocab.size(); ++c)
      if (dists[i].units[c] != 0) os << foi_ids[i] << ',' << vocab.code(c) << ',' << csv::format(dists[i].share(c)) << '\n';
}

inline std::map<std::string, CropDistribution> read_distributions(std::istream& in, const CropVocab& vocab) {
  std::map<std::string, CropDistribution> out;
  csv::read(in, kDistributionHeader, [&](const csv::Row& row) {
    auto& d = out[row.str(0)];
    if (d.units.empty()) d.units.assign(vocab.size(), 0);
    const auto idx = vocab.find(row.str(1));
    if (!idx) throw ParseError("crop code " + row.str(1) + " not in vocabulary", row.line());
    const double share = row.real(2);
    if (!(share >= 0 && share <= 1)) throw ParseError("share outside [0, 1]", row.line());
    d.units[*idx] = static_cast<std::int32_t>(std::llround(share * kShareScale));
  });
  return out;
}

}  // namespace cropnet

#pragma once

// Dataset -> model-ready arrays: conditioned season features, normalisation,
// local crop distributions, labels, and batch assembly for (FOI, season) samples.

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <numeric>
#include <mutex>
#include <thread>
#include <vector>

#include "cropnet/features.hpp"
#include "cropnet/ingest.hpp"
#include "cropnet/model.hpp"
#include "cropnet/signal.hpp"

namespace cropnet {

// Runs fn(i) for i in [0, n) over `threads` workers. Results must be written
// to per-index slots, so the outcome does not depend on the thread count.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, threads);
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Features per (FOI, season), unnormalised.

struct FeatureTable {
  std::vector<std::string> foi_ids;
  std::vector<int> seasons;
  std::vector<double> values;  // [foi][season][672]
  std::vector<char> missing;   // [foi][season]: no usable RS, block stays zero

  std::size_t index(std::size_t foi, std::size_t season) const { return foi * seasons.size() + season; }
  std::span<const double> row(std::size_t foi, std::size_t season) const {
    return {values.data() + index(foi, season) * kSeasonFeatureLength, kSeasonFeatureLength};
  }
  std::span<double> row(std::size_t foi, std::size_t season) {
    return {values.data() + index(foi, season) * kSeasonFeatureLength, kSeasonFeatureLength};
  }
};

struct FeaturizeStats {
  std::size_t conditioned_fois = 0;
  std::size_t failed_fois = 0;
  std::size_t cloud_flags = 0;
  std::size_t shadow_flags = 0;
};

// Conditions each FOI's RS seasons jointly and extracts the 672 features per season.
inline std::vector<std::array<RegularSeries, kNumVariables>> condition_parcel(const ParcelRecord& p,
                                                                            std::span<const int> seasons,
                                                                            const ConditioningConfig& cfg,
                                                                            std::vector<char>& have,
                                                                            ConditioningStats* stats = nullptr) {
  std::vector<SeasonObservations> obs;
  std::vector<std::size_t> where;
  for (std::size_t s = 0; s < seasons.size(); ++s) {
    const auto* rec = p.season(seasons[s]);
    if (!rec || !rec->has_rs) continue;
    SeasonObservations so;
    so.season_offset = static_cast<int>(s);
    so.variables = rec->series;
    obs.push_back(std::move(so));
    where.push_back(s);
  }
  std::vector<std::array<RegularSeries, kNumVariables>> out(seasons.size());
  have.assign(seasons.size(), 0);
  if (obs.empty()) return out;
  const auto cond = condition_seasons(obs, cfg, stats);
  for (std::size_t k = 0; k < cond.size(); ++k) {
    out[where[k]] = cond[k].variables;
    have[where[k]] = 1;
  }
  return out;
}

inline FeatureTable featurize(const Dataset& ds, const ConditioningConfig& cfg, unsigned threads = 1,
                              FeaturizeStats* stats = nullptr) {
  FeatureTable t;
  t.seasons = ds.seasons;
  for (const auto& p : ds.parcels) t.foi_ids.push_back(p.foi_id);
  const std::size_t S = ds.seasons.size();
  t.values.assign(ds.parcels.size() * S * kSeasonFeatureLength, 0.0);
  t.missing.assign(ds.parcels.size() * S, 1);
  std::vector<ConditioningStats> per(ds.parcels.size());
  std::vector<char> failed(ds.parcels.size(), 0);
  parallel_for(ds.parcels.size(), threads, [&](std::size_t f) {
    std::vector<char> have;
    std::vector<std::array<RegularSeries, kNumVariables>> cond;
    try {
      cond = condition_parcel(ds.parcels[f], ds.seasons, cfg, have, &per[f]);
    } catch (const InputError&) {
      failed[f] = 1;  // left as missing RS
      return;
    }
    for (std::size_t s = 0; s < S; ++s) {
      if (!have[s]) continue;
      const auto sf = season_features(cond[s]);
      std::copy(sf.values.begin(), sf.values.end(), t.row(f, s).begin());
      t.missing[t.index(f, s)] = 0;
    }
  });
  if (stats) {
    *stats = {};
    for (std::size_t f = 0; f < per.size(); ++f) {
      if (failed[f]) {
        ++stats->failed_fois;
        continue;
      }
      ++stats->conditioned_fois;
      stats->cloud_flags += per[f].cloud_flags;
      stats->shadow_flags += per[f].shadow_flags;
    }
  }
  return t;
}

inline std::vector<SeasonFeatures> to_season_features(const FeatureTable& t) {
  std::vector<SeasonFeatures> out;
  for (std::size_t f = 0; f < t.foi_ids.size(); ++f)
    for (std::size_t s = 0; s < t.seasons.size(); ++s) {
      if (t.missing[t.index(f, s)]) continue;
      SeasonFeatures sf;
      sf.foi_id = t.foi_ids[f];
      sf.season = t.seasons[s];
      const auto r = t.row(f, s);
      sf.values.assign(r.begin(), r.end());
      out.push_back(std::move(sf));
    }
  return out;
}

// Rebuilds a table from feature rows; (FOI, season) pairs without a row are missing.
inline FeatureTable from_season_features(const Dataset& ds, std::span<const SeasonFeatures> rows) {
  FeatureTable t;
  t.seasons = ds.seasons;
  std::map<std::string, std::size_t> foi_index;
  for (const auto& p : ds.parcels) {
    foi_index[p.foi_id] = t.foi_ids.size();
    t.foi_ids.push_back(p.foi_id);
  }
  const std::size_t S = ds.seasons.size();
  t.values.assign(t.foi_ids.size() * S * kSeasonFeatureLength, 0.0);
  t.missing.assign(t.foi_ids.size() * S, 1);
  for (const auto& r : rows) {
    auto it = foi_index.find(r.foi_id);
    if (it == foi_index.end()) throw InputError("features for unknown FOI " + r.foi_id);
    const std::size_t s = ds.season_index(r.season);
    std::copy(r.values.begin(), r.values.end(), t.row(it->second, s).begin());
    t.missing[t.index(it->second, s)] = r.all_missing() ? 1 : 0;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Prepared data: everything a model needs, indexed by (FOI, season index).

struct PreparedData {
  CropVocab vocab;
  std::vector<int> seasons;
  std::vector<std::string> foi_ids;
  std::vector<int> labels;     // [foi][season] vocab index, -1 when unlabelled
  FeatureTable features;       // normalised in place; missing rows stay zero
  NormStats norm;
  Tensor2 distribution;        // FOIs x V, from the reference season
  int reference_season = 0;

  std::size_t fois() const { return foi_ids.size(); }
  std::size_t season_count() const { return seasons.size(); }
  int label(std::size_t foi, std::size_t season) const { return labels[foi * seasons.size() + season]; }
};

// CD vectors of every FOI from the crops of one season (FOIs without a crop
// that season contribute nothing but still receive a vector).
inline Tensor2 distributions_for(const Dataset& ds, const CropVocab& vocab, int season, double radius_km = 10.0) {
  std::vector<ParcelPoint> pts;
  for (const auto& p : ds.parcels) {
    const auto* rec = p.season(season);
    if (!rec) continue;
    const auto idx = vocab.find(rec->crop);
    if (!idx) continue;
    pts.push_back({p.x_km, p.y_km, p.area_ha, *idx});
  }
  // Grid-bucketed pass over the labelled parcels; unlabelled FOIs are queried directly.
  const auto dists = crop_distributions(pts, vocab.size(), radius_km);
  Tensor2 out = Tensor2::Zero(static_cast<Eigen::Index>(ds.parcels.size()), static_cast<Eigen::Index>(vocab.size()));
  std::size_t k = 0;
  for (std::size_t f = 0; f < ds.parcels.size(); ++f) {
    const auto& p = ds.parcels[f];
    const auto* rec = p.season(season);
    CropDistribution d;
    if (rec && vocab.find(rec->crop)) d = dists[k++];
    else d = crop_distribution(p.x_km, p.y_km, pts, vocab.size(), radius_km);
    for (std::size_t c = 0; c < vocab.size(); ++c) out(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) = d.share(c);
  }
  return out;
}

// Fits normalisation on the given (FOI, season) rows and applies it to all
// non-missing rows.
inline NormStats normalize_features(FeatureTable& t, std::span<const std::pair<std::size_t, std::size_t>> fit_rows) {
  std::vector<std::vector<double>> rows;
  for (const auto& [f, s] : fit_rows) {
    if (t.missing[t.index(f, s)]) continue;
    const auto r = t.row(f, s);
    rows.emplace_back(r.begin(), r.end());
  }
  const NormStats st = fit_norm_stats(rows);
  for (std::size_t f = 0; f < t.foi_ids.size(); ++f)
    for (std::size_t s = 0; s < t.seasons.size(); ++s)
      if (!t.missing[t.index(f, s)]) apply_norm(t.row(f, s), st);
  return st;
}

inline void apply_normalization(FeatureTable& t, const NormStats& st) {
  for (std::size_t f = 0; f < t.foi_ids.size(); ++f)
    for (std::size_t s = 0; s < t.seasons.size(); ++s)
      if (!t.missing[t.index(f, s)]) apply_norm(t.row(f, s), st);
}

// Labels and CD for a dataset under a (possibly shared) vocabulary; features
// are attached unnormalised.
inline PreparedData prepare(const Dataset& ds, FeatureTable features, const CropVocab& vocab, int reference_season) {
  if (features.foi_ids.size() != ds.parcels.size() || features.seasons != ds.seasons)
    throw ShapeError("feature table does not match the dataset");
  PreparedData d;
  d.vocab = vocab;
  d.seasons = ds.seasons;
  d.reference_season = reference_season;
  for (const auto& p : ds.parcels) d.foi_ids.push_back(p.foi_id);
  d.labels.assign(ds.parcels.size() * ds.seasons.size(), -1);
  for (std::size_t f = 0; f < ds.parcels.size(); ++f)
    for (std::size_t s = 0; s < ds.seasons.size(); ++s)
      if (const auto* rec = ds.parcels[f].season(ds.seasons[s]))
        if (const auto idx = vocab.find(rec->crop)) d.labels[f * ds.seasons.size() + s] = static_cast<int>(*idx);
  d.features = std::move(features);
  d.distribution = distributions_for(ds, vocab, reference_season);
  return d;
}

// ---------------------------------------------------------------------------
// Samples and batches

struct Sample {
  std::uint32_t foi = 0;
  std::uint32_t season = 0;  // index of the target season
};

inline bool operator==(const Sample& a, const Sample& b) { return a.foi == b.foi && a.season == b.season; }
inline bool operator<(const Sample& a, const Sample& b) {
  return a.season != b.season ? a.season < b.season : a.foi < b.foi;
}

struct BatchOptions {
  std::size_t windows = kNumWindows;
  std::size_t max_history = 0;  // seasons fed to the model, 0 = all available
};

inline std::size_t history_start(std::size_t target, std::size_t max_history) {
  if (max_history == 0 || target + 1 <= max_history) return 0;
  return target + 1 - max_history;
}

inline std::size_t sequence_length(const Sample& s, std::size_t max_history) {
  return s.season + 1 - history_start(s.season, max_history);
}

// All samples of a batch must share the sequence length.
inline Batch make_batch(const PreparedData& d, std::span<const Sample> samples, Variant variant, const BatchOptions& opt) {
  if (samples.empty()) throw InputError("empty batch");
  const auto m = modalities(variant);
  const std::size_t T = sequence_length(samples.front(), opt.max_history);
  const auto B = static_cast<Eigen::Index>(samples.size());
  Batch b;
  b.windows = opt.windows;
  b.targets.resize(samples.size());
  if (m.crop_rotation) b.prev_tokens.assign(T, std::vector<int>(samples.size(), 0));
  if (m.remote_sensing) b.rs.assign(T, Tensor2::Zero(B, static_cast<Eigen::Index>(kSeasonFeatureLength)));
  if (m.crop_distribution) b.distribution.resize(B, static_cast<Eigen::Index>(d.vocab.size()));
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const Sample& s = samples[r];
    if (sequence_length(s, opt.max_history) != T) throw ShapeError("batch mixes sequence lengths");
    const std::size_t h0 = history_start(s.season, opt.max_history);
    b.targets[r] = d.label(s.foi, s.season);
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t season = h0 + t;
      if (m.crop_rotation && season > 0) {
        const int prev = d.label(s.foi, season - 1);
        b.prev_tokens[t][r] = prev >= 0 ? prev + 1 : 0;
      }
      if (m.remote_sensing && !d.features.missing[d.features.index(s.foi, season)]) {
        const auto row = d.features.row(s.foi, season);
        b.rs[t].row(static_cast<Eigen::Index>(r)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), static_cast<Eigen::Index>(row.size()));
      }
    }
    if (m.crop_distribution) b.distribution.row(static_cast<Eigen::Index>(r)) = d.distribution.row(s.foi);
  }
  return b;
}

// Splits samples into same-length chunks of at most batch_size, keeping input order within a length.
inline std::vector<std::vector<Sample>> group_batches(std::span<const Sample> samples, std::size_t batch_size,
                                                      std::size_t max_history) {
  std::map<std::size_t, std::vector<Sample>> by_len;
  for (const auto& s : samples) by_len[sequence_length(s, max_history)].push_back(s);
  std::vector<std::vector<Sample>> out;
  for (auto& [len, v] : by_len)
    for (std::size_t i = 0; i < v.size(); i += batch_size)
      out.emplace_back(v.begin() + static_cast<std::ptrdiff_t>(i),
                       v.begin() + static_cast<std::ptrdiff_t>(std::min(v.size(), i + batch_size)));
  return out;
}

// Predicted class per sample, in input order.
inline std::vector<int> predict_samples(const Model& model, const PreparedData& d, std::span<const Sample> samples,
                                        const BatchOptions& opt, std::size_t batch_size = 512) {
  std::vector<int> out(samples.size(), -1);
  std::map<std::size_t, std::vector<std::size_t>> by_len;
  for (std::size_t i = 0; i < samples.size(); ++i) by_len[sequence_length(samples[i], opt.max_history)].push_back(i);
  for (const auto& [len, idx] : by_len)
    for (std::size_t i = 0; i < idx.size(); i += batch_size) {
      std::vector<Sample> chunk;
      for (std::size_t k = i; k < std::min(idx.size(), i + batch_size); ++k) chunk.push_back(samples[idx[k]]);
      const auto pred = model.predict(make_batch(d, chunk, model.spec().variant, opt));
      for (std::size_t k = 0; k < chunk.size(); ++k) out[idx[i + k]] = pred[k];
    }
  return out;
}

inline std::vector<int> sample_labels(const PreparedData& d, std::span<const Sample> samples) {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(d.label(s.foi, s.season));
  return out;
}

}  // namespace cropnet

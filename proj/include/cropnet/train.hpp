#pragma once

// Splits, training loop with early-season augmentation, checkpoint I/O,
// transfer and few-shot protocols.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cropnet/kernels/adam.hpp"
#include "cropnet/kernels/checkpoint.hpp"
#include "cropnet/pipeline.hpp"

namespace cropnet {

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.integer(0, static_cast<long long>(i - 1)));
    std::swap(v[i - 1], v[j]);
  }
}

// ---------------------------------------------------------------------------
// Splits

enum class SplitMode { Temporal, SpatioTemporal };

inline std::string_view to_string(SplitMode m) { return m == SplitMode::Temporal ? "temporal" : "spatio-temporal"; }

inline SplitMode parse_split_mode(std::string_view s) {
  if (s == "temporal") return SplitMode::Temporal;
  if (s == "spatio-temporal") return SplitMode::SpatioTemporal;
  throw InputError("unknown split mode '" + std::string(s) + "'; valid modes: temporal, spatio-temporal");
}

struct SplitPolicy {
  SplitMode mode = SplitMode::Temporal;
  double holdout_fraction = 0.10;   // FOIs held out for testing (spatio-temporal)
  std::size_t first_target = 1;     // earliest target season index (needs this many prior seasons)
  std::uint64_t seed = 1;
};

struct Splits {
  std::vector<Sample> train, val, test;
  std::size_t val_season = 0;   // season indices
  std::size_t test_season = 0;
  std::vector<char> holdout;    // per FOI; all zero in temporal mode
};

// Number of held-out FOIs for a given fraction (nearest integer).
inline std::size_t holdout_count(std::size_t fois, double fraction) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(fois)));
}

inline std::vector<char> holdout_fois(std::size_t fois, double fraction, std::uint64_t seed) {
  if (fraction < 0 || fraction >= 1) throw InputError("holdout fraction must be in [0, 1)");
  std::vector<std::size_t> order(fois);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = Rng(seed).stream(streams::kSplit);
  shuffle_in_place(order, rng);
  std::vector<char> out(fois, 0);
  for (std::size_t k = 0; k < holdout_count(fois, fraction); ++k) out[order[k]] = 1;
  return out;
}

// Test = last season, validation = second to last, training targets are the
// earlier seasons from `first_target` on. Only labelled targets are kept.
inline Splits make_splits(std::span<const int> labels, std::size_t fois, std::size_t seasons, const SplitPolicy& pol) {
  if (seasons < 3) throw InputError("splits need at least 3 seasons, got " + std::to_string(seasons));
  if (pol.first_target >= seasons - 2)
    throw InputError("no training season left before the validation season");
  Splits s;
  s.test_season = seasons - 1;
  s.val_season = seasons - 2;
  s.holdout = pol.mode == SplitMode::SpatioTemporal ? holdout_fois(fois, pol.holdout_fraction, pol.seed)
                                                    : std::vector<char>(fois, 0);
  auto labelled = [&](std::size_t f, std::size_t season) { return labels[f * seasons + season] >= 0; };
  for (std::size_t season = pol.first_target; season < s.val_season; ++season)
    for (std::size_t f = 0; f < fois; ++f)
      if (!s.holdout[f] && labelled(f, season))
        s.train.push_back({static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(season)});
  for (std::size_t f = 0; f < fois; ++f) {
    if (!s.holdout[f] && labelled(f, s.val_season))
      s.val.push_back({static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(s.val_season)});
    const bool in_test = pol.mode == SplitMode::Temporal || s.holdout[f];
    if (in_test && labelled(f, s.test_season))
      s.test.push_back({static_cast<std::uint32_t>(f), static_cast<std::uint32_t>(s.test_season)});
  }
  return s;
}

inline Splits make_splits(const PreparedData& d, const SplitPolicy& pol) {
  return make_splits(d.labels, d.fois(), d.season_count(), pol);
}

// Test samples restricted to the given FOIs (e.g. a spatial holdout).
inline std::vector<Sample> restrict_fois(std::span<const Sample> samples, const std::vector<char>& keep) {
  std::vector<Sample> out;
  for (const auto& s : samples)
    if (keep[s.foi]) out.push_back(s);
  return out;
}

// ---------------------------------------------------------------------------
// Experiment: prepared data + splits, with normalisation fitted on the
// training FOIs' seasons before the validation season and CD taken from the
// validation season.

struct Experiment {
  PreparedData data;
  Splits splits;
};

inline Experiment make_experiment(const Dataset& ds, FeatureTable features, const CropVocab& vocab,
                                  const SplitPolicy& pol) {
  if (ds.seasons.size() < 3) throw InputError("splits need at least 3 seasons, got " + std::to_string(ds.seasons.size()));
  Experiment e;
  const int val_year = ds.seasons[ds.seasons.size() - 2];
  e.data = prepare(ds, std::move(features), vocab, val_year);
  e.splits = make_splits(e.data, pol);
  std::vector<std::pair<std::size_t, std::size_t>> fit;
  for (std::size_t f = 0; f < e.data.fois(); ++f)
    if (!e.splits.holdout[f])
      for (std::size_t s = 0; s < e.splits.val_season; ++s) fit.emplace_back(f, s);
  e.data.norm = normalize_features(e.data.features, fit);
  return e;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t batch_size = 256;
  std::size_t epochs = 25;
  kernels::AdamConfig adam;
  bool augment = false;
  std::size_t min_crop = 10;  // early-season crop range, in windows
  std::size_t max_crop = kNumWindows;
  std::size_t max_history = 0;
  std::uint64_t seed = 1;

  void validate() const {
    if (batch_size < 1) throw InputError("batch_size must be >= 1");
    if (min_crop < 1 || min_crop > max_crop || max_crop > kNumWindows)
      throw InputError("early-season crop range must satisfy 1 <= min <= max <= 24");
    if (!(adam.lr > 0)) throw InputError("learning rate must be positive");
  }

  std::map<std::string, std::string> to_kv() const {
    return {{"batch_size", std::to_string(batch_size)},
            {"epochs", std::to_string(epochs)},
            {"lr", csv::format(adam.lr)},
            {"augment", augment ? "true" : "false"},
            {"min_crop", std::to_string(min_crop)},
            {"max_crop", std::to_string(max_crop)},
            {"max_history", std::to_string(max_history)},
            {"seed", std::to_string(seed)}};
  }
};

// Draws one visible-window count for the whole batch (all rows, all seasons).
inline std::size_t early_season_crop(Batch& b, Rng& rng, std::size_t min_windows = 10,
                                     std::size_t max_windows = kNumWindows) {
  const auto t = static_cast<std::size_t>(rng.integer(static_cast<long long>(min_windows),
                                                      static_cast<long long>(max_windows)));
  b.windows = t;
  return t;
}

struct HistoryRow {
  std::size_t epoch = 0;
  std::string split;
  std::string metric;
  double value = 0;
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
  std::size_t best_epoch = 0;  // 0 = initialisation
  double best_val_accuracy = -1;
};

inline void write_history(std::ostream& os, const TrainHistory& h) {
  os << "epoch,split,metric,value\n";
  for (const auto& r : h.rows) os << r.epoch << ',' << r.split << ',' << r.metric << ',' << csv::format(r.value) << '\n';
}

inline double accuracy_of(std::span<const int> truth, std::span<const int> pred) {
  if (truth.empty()) return 0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

// Mini-batch Adam over the training samples; after each epoch the model is
// scored on the validation samples and the best epoch's parameters are kept.
// Zero epochs leave the model untouched with an empty history.
inline TrainHistory train_model(Model& model, const PreparedData& d, std::span<const Sample> train,
                                std::span<const Sample> val, const TrainConfig& cfg) {
  cfg.validate();
  TrainHistory h;
  if (cfg.epochs == 0) return h;
  if (train.empty()) throw InputError("no training samples");
  auto& store = model.params();
  kernels::Adam adam(cfg.adam);
  const Rng root(cfg.seed);
  const BatchOptions full{kNumWindows, cfg.max_history};
  std::vector<Tensor2> best = store.snapshot();
  const std::vector<int> val_truth = sample_labels(d, val);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<Sample> order(train.begin(), train.end());
    Rng shuffle = root.stream(streams::kShuffle, epoch);
    shuffle_in_place(order, shuffle);
    auto batches = group_batches(order, cfg.batch_size, cfg.max_history);
    shuffle_in_place(batches, shuffle);
    Rng aug = root.stream(streams::kAugment, epoch);

    double loss_sum = 0;
    std::size_t seen = 0, hits = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      Batch b = make_batch(d, batches[bi], model.spec().variant, full);
      if (cfg.augment) early_season_crop(b, aug, cfg.min_crop, cfg.max_crop);
      Model::Trace tr;
      const Tensor2 logits = model.forward(b, tr);
      const auto loss = kernels::cross_entropy(logits, b.targets);
      if (!std::isfinite(loss.loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi + 1));
      store.zero_grad();
      model.backward(b, tr, loss.grad);
      adam.step(store);
      loss_sum += loss.loss * static_cast<double>(b.rows());
      seen += b.rows();
      const auto pred = kernels::argmax_rows(logits);
      for (std::size_t r = 0; r < pred.size(); ++r) hits += pred[r] == b.targets[r];
    }
    h.rows.push_back({epoch, "train", "loss", loss_sum / static_cast<double>(seen)});
    h.rows.push_back({epoch, "train", "accuracy", static_cast<double>(hits) / static_cast<double>(seen)});

    // Without validation samples the last epoch is kept.
    double val_acc = 0;
    if (!val.empty()) {
      val_acc = accuracy_of(val_truth, predict_samples(model, d, val, full));
      h.rows.push_back({epoch, "val", "accuracy", val_acc});
    }
    if (val.empty() || val_acc > h.best_val_accuracy) {
      h.best_val_accuracy = val.empty() ? -1 : val_acc;
      h.best_epoch = epoch;
      best = store.snapshot();
    }
  }
  store.restore(best);
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoints: parameters plus everything needed to rebuild inputs.

inline nlohmann::json checkpoint_meta(const Model& model, const PreparedData& d, const TrainConfig& cfg,
                                      const TrainHistory& h) {
  nlohmann::json m;
  m["spec"] = model.spec().to_json();
  std::vector<std::string> codes;
  for (std::size_t i = 0; i < d.vocab.size(); ++i) codes.push_back(d.vocab.code(i));
  m["vocab"] = codes;
  m["norm_mean"] = d.norm.mean;
  m["norm_std"] = d.norm.std;
  m["seasons"] = d.seasons;
  m["reference_season"] = d.reference_season;
  m["max_history"] = cfg.max_history;
  m["train"] = cfg.to_kv();
  m["best_epoch"] = h.best_epoch;
  return m;
}

inline CropVocab vocab_from_meta(const nlohmann::json& meta) {
  return CropVocab(meta.at("vocab").get<std::vector<std::string>>());
}

inline NormStats norm_from_meta(const nlohmann::json& meta) {
  NormStats st;
  st.mean = meta.at("norm_mean").get<std::vector<double>>();
  st.std = meta.at("norm_std").get<std::vector<double>>();
  return st;
}

inline void save_model(const std::filesystem::path& path, const Model& model, const nlohmann::json& meta) {
  kernels::save_checkpoint(path.string(), model.params(), meta);
}

struct LoadedModel {
  Model model;
  nlohmann::json meta;
};

inline LoadedModel load_model(const std::filesystem::path& path) {
  const auto j = kernels::read_checkpoint(path.string());
  const auto& meta = j.at("meta");
  Model m(ModelSpec::from_json(meta.at("spec")), 0);
  kernels::from_json(j, m.params());
  return {std::move(m), meta};
}

inline void require_same_vocab(const CropVocab& source, const CropVocab& target) {
  if (source == target) return;
  throw InputError("vocabulary mismatch: checkpoint has " + std::to_string(source.size()) +
                   " crop codes, target data has " + std::to_string(target.size()) +
                   "; build both from the union vocabulary");
}

// ---------------------------------------------------------------------------
// Transfer and few-shot

struct FewShotPlan {
  std::vector<int> exponents{4, 6, 8, 10};  // 2^N samples per aggregated class
  std::uint64_t seed = 1;
};

// Nested per-class subsets: each class's candidates are shuffled once and
// every N takes a prefix of that order, so smaller subsets are contained in
// larger ones. Classes with fewer candidates contribute all of them.
inline std::map<int, std::vector<Sample>> few_shot_subsets(std::span<const Sample> pool,
                                                           std::span<const std::string> class_of_sample,
                                                           const FewShotPlan& plan) {
  if (class_of_sample.size() != pool.size()) throw ShapeError("few-shot: one class per pool sample required");
  std::map<std::string, std::vector<Sample>> by_class;
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[class_of_sample[i]].push_back(pool[i]);
  const Rng root(plan.seed);
  std::size_t k = 0;
  for (auto& [cls, v] : by_class) {
    Rng rng = root.stream(streams::kSampling, k++);
    shuffle_in_place(v, rng);
  }
  std::map<int, std::vector<Sample>> out;
  for (int n : plan.exponents) {
    if (n < 0 || n > 30) throw InputError("few-shot exponent out of range");
    const std::size_t quota = std::size_t{1} << n;
    auto& subset = out[n];
    for (const auto& [cls, v] : by_class)
      subset.insert(subset.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(quota, v.size())));
  }
  return out;
}

// Copies source parameters into a freshly built target model (same spec);
// fine-tuning then continues with every layer trainable.
inline Model clone_model(const Model& source) {
  Model m(source.spec(), 0);
  m.params().restore(source.params().snapshot());
  return m;
}

struct FewShotRun {
  int exponent = 0;
  std::size_t samples = 0;
  std::vector<int> scratch_pred;     // on the evaluation samples
  std::vector<int> pretrained_pred;
  TrainHistory scratch_history, pretrained_history;
};

// For each N: fine-tunes a copy of the pretrained model (no frozen layers) and
// trains a freshly initialised model of the same spec on the nested subset,
// both selected on `val` and scored on `eval`.
inline std::vector<FewShotRun> run_few_shot(const Model& pretrained, const PreparedData& target,
                                            std::span<const Sample> pool, std::span<const std::string> class_of_sample,
                                            std::span<const Sample> val, std::span<const Sample> eval,
                                            const FewShotPlan& plan, const TrainConfig& cfg) {
  if (pretrained.spec().vocab != static_cast<int>(target.vocab.size()))
    throw InputError("vocabulary mismatch: pretrained model has " + std::to_string(pretrained.spec().vocab) +
                     " crop codes, target data has " + std::to_string(target.vocab.size()));
  const BatchOptions full{kNumWindows, cfg.max_history};
  std::vector<FewShotRun> out;
  for (const auto& [n, subset] : few_shot_subsets(pool, class_of_sample, plan)) {
    FewShotRun r;
    r.exponent = n;
    r.samples = subset.size();
    Model tuned = clone_model(pretrained);
    r.pretrained_history = train_model(tuned, target, subset, val, cfg);
    r.pretrained_pred = predict_samples(tuned, target, eval, full);
    Model scratch(pretrained.spec(), cfg.seed);
    r.scratch_history = train_model(scratch, target, subset, val, cfg);
    r.scratch_pred = predict_samples(scratch, target, eval, full);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cropnet

#include <gtest/gtest.h>

#include "cropnet/pipeline.hpp"
#include "tiny.hpp"

using namespace cropnet;

TEST(Featurize, SameResultForAnyThreadCount) {
  const auto& w = tiny::world();
  FeaturizeStats stats;
  const auto t3 = featurize(w.generated.dataset, ConditioningConfig{}, 3, &stats);
  EXPECT_EQ(t3.values, w.features.values);
  EXPECT_EQ(t3.missing, w.features.missing);
  EXPECT_EQ(stats.conditioned_fois + stats.failed_fois, w.generated.dataset.parcels.size());
  EXPECT_GT(stats.cloud_flags, 0u);
}

TEST(Featurize, CropOnlySeasonsStayMissingAndRsSeasonsAreFilled) {
  const auto& w = tiny::world();
  const auto& t = w.features;
  std::size_t filled = 0;
  for (std::size_t f = 0; f < t.foi_ids.size(); ++f) {
    EXPECT_TRUE(t.missing[t.index(f, 0)]);  // first season carries crops only
    for (double v : t.row(f, 0)) EXPECT_EQ(v, 0.0);
    for (std::size_t s = 1; s < t.seasons.size(); ++s) filled += !t.missing[t.index(f, s)];
  }
  EXPECT_GT(filled, t.foi_ids.size() * (t.seasons.size() - 1) * 9 / 10);
}

TEST(Featurize, SeasonFeatureRowsRoundTrip) {
  const auto& w = tiny::world();
  const auto rows = to_season_features(w.features);
  const auto back = from_season_features(w.generated.dataset, rows);
  EXPECT_EQ(back.values, w.features.values);
  EXPECT_EQ(back.missing, w.features.missing);
}

TEST(Prepare, LabelsFollowTheVocabularyAndDistributionsSumToOne) {
  const auto& w = tiny::world();
  const auto& ds = w.generated.dataset;
  const auto d = prepare(ds, w.features, w.vocab, ds.seasons[2]);
  for (std::size_t f = 0; f < ds.parcels.size(); ++f)
    for (std::size_t s = 0; s < ds.seasons.size(); ++s)
      EXPECT_EQ(w.vocab.code(static_cast<std::size_t>(d.label(f, s))), ds.parcels[f].season(ds.seasons[s])->crop);
  for (Eigen::Index r = 0; r < d.distribution.rows(); ++r) EXPECT_NEAR(d.distribution.row(r).sum(), 1.0, 1e-3);
  FeatureTable wrong = w.features;
  wrong.seasons.pop_back();
  EXPECT_THROW(prepare(ds, wrong, w.vocab, ds.seasons[2]), ShapeError);
}

TEST(Batches, TokensFeaturesAndDistributionLineUp) {
  const auto& w = tiny::world();
  const auto& ds = w.generated.dataset;
  const auto d = prepare(ds, w.features, w.vocab, ds.seasons[2]);
  const std::vector<Sample> samples{{3, 2}, {7, 2}};
  const auto b = make_batch(d, samples, Variant::HierE_final, BatchOptions{});
  ASSERT_EQ(b.prev_tokens.size(), 3u);
  ASSERT_EQ(b.rs.size(), 3u);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const auto f = samples[r].foi;
    EXPECT_EQ(b.targets[r], d.label(f, 2));
    EXPECT_EQ(b.prev_tokens[0][r], 0);
    EXPECT_EQ(b.prev_tokens[1][r], d.label(f, 0) + 1);
    EXPECT_EQ(b.prev_tokens[2][r], d.label(f, 1) + 1);
    EXPECT_EQ(b.rs[0].row(static_cast<Eigen::Index>(r)).cwiseAbs().sum(), 0.0);
    const auto row = d.features.row(f, 2);
    for (std::size_t j = 0; j < row.size(); ++j) EXPECT_EQ(b.rs[2](static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)), row[j]);
    EXPECT_TRUE(b.distribution.row(static_cast<Eigen::Index>(r)) == d.distribution.row(f));
  }
  const auto crop_only = make_batch(d, samples, Variant::InterYE_Crop, BatchOptions{});
  EXPECT_TRUE(crop_only.rs.empty());
  EXPECT_FALSE(crop_only.has_cd());

  const std::vector<Sample> mixed{{3, 2}, {7, 1}};
  EXPECT_THROW(make_batch(d, mixed, Variant::HierE_RS, BatchOptions{}), ShapeError);
  EXPECT_THROW(make_batch(d, std::vector<Sample>{}, Variant::HierE_RS, BatchOptions{}), InputError);
}

TEST(Batches, HistoryLimitKeepsTheLatestSeasons) {
  EXPECT_EQ(history_start(3, 0), 0u);
  EXPECT_EQ(history_start(3, 2), 2u);
  EXPECT_EQ(history_start(1, 5), 0u);
  EXPECT_EQ(sequence_length({0, 3}, 2), 2u);
  EXPECT_EQ(sequence_length({0, 3}, 0), 4u);
}

TEST(Batches, GroupingKeepsLengthsApartAndOrderWithin) {
  std::vector<Sample> s;
  for (std::uint32_t i = 0; i < 23; ++i) s.push_back({i, 1 + i % 3});
  const auto groups = group_batches(s, 4, 0);
  std::size_t total = 0;
  for (const auto& g : groups) {
    EXPECT_LE(g.size(), 4u);
    for (const auto& x : g) EXPECT_EQ(x.season, g.front().season);
    for (std::size_t i = 1; i < g.size(); ++i) EXPECT_LT(g[i - 1].foi, g[i].foi);
    total += g.size();
  }
  EXPECT_EQ(total, s.size());
}

TEST(Batches, PredictionsDoNotDependOnChunking) {
  const auto& w = tiny::world();
  const auto& ds = w.generated.dataset;
  const auto d = prepare(ds, w.features, w.vocab, ds.seasons[2]);
  Model m(tiny::spec(Variant::HierE_final, w.vocab), 3);
  std::vector<Sample> s;
  for (std::uint32_t f = 0; f < 50; ++f) s.push_back({f, 1 + f % 3});
  EXPECT_EQ(predict_samples(m, d, s, BatchOptions{}, 7), predict_samples(m, d, s, BatchOptions{}, 512));
}

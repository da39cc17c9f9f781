#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>

#include "cropnet/rng.hpp"
#include "cropnet/signal.hpp"
#include "cropnet/synth.hpp"
#include "oracles.hpp"

using namespace cropnet;

namespace {

ObservationSeries random_series(Rng& rng, std::size_t n, double nan_rate, double invalid_rate) {
  ObservationSeries s;
  s.variable = Variable::RED;
  int day = static_cast<int>(rng.integer(0, 3));
  for (std::size_t i = 0; i < n; ++i) {
    day += static_cast<int>(rng.integer(1, 6));
    if (rng.bernoulli(nan_rate)) {
      s.push(day, std::numeric_limits<double>::quiet_NaN(), false);
    } else {
      // Quantised values produce ties, which exercise the even-window medians.
      const double v = rng.bernoulli(0.3) ? std::round(rng.normal(0.2, 0.05) * 100) / 100 : rng.normal(0.2, 0.05);
      s.push(day, v + (rng.bernoulli(0.05) ? rng.uniform(-0.4, 0.4) : 0.0), !rng.bernoulli(invalid_rate));
    }
  }
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Hampel

TEST(Hampel, MatchesBruteForceMedianMadOracle) {
  Rng rng(21);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_series(rng, static_cast<std::size_t>(rng.integer(1, 80)), 0.15, 0.1);
    const int hw = static_cast<int>(rng.integer(1, 5));
    const double k = rng.uniform(1.0, 4.0);
    for (auto dir : {HampelDirection::Both, HampelDirection::Up, HampelDirection::Down}) {
      const auto got = hampel_filter(s, hw, k, dir);
      EXPECT_EQ(got.series.valid, oracle::hampel_flags(s, hw, k, dir)) << "trial " << trial;
      EXPECT_EQ(got.series.values.size(), s.values.size());
    }
  }
}

TEST(Hampel, IsIdempotentAndNeverChangesValues) {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = random_series(rng, 60, 0.1, 0.0);
    const auto once = hampel_filter(s, 3, 3.0);
    const auto twice = hampel_filter(once.series, 3, 3.0);
    EXPECT_EQ(once.series.valid, twice.series.valid);
    EXPECT_EQ(twice.flagged, 0u);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (std::isfinite(s.values[i])) {
        EXPECT_EQ(once.series.values[i], s.values[i]);
      }
  }
}

TEST(Hampel, DirectionalFilteringFlagsOnlyThatSide) {
  ObservationSeries s;
  for (int d = 0; d < 15; ++d) s.push(d * 5, 0.2 + 0.001 * (d % 3));
  s.values[4] = 0.9;
  s.values[10] = -0.5;
  const auto up = hampel_filter(s, 3, 3.0, HampelDirection::Up);
  const auto down = hampel_filter(s, 3, 3.0, HampelDirection::Down);
  const auto both = hampel_filter(s, 3, 3.0, HampelDirection::Both);
  EXPECT_FALSE(up.series.valid[4]);
  EXPECT_TRUE(up.series.valid[10]);
  EXPECT_TRUE(down.series.valid[4]);
  EXPECT_FALSE(down.series.valid[10]);
  EXPECT_EQ(both.flagged, 2u);
}

TEST(Hampel, ShortSeriesAreReturnedUnchanged) {
  ObservationSeries s;
  for (int d = 0; d < 6; ++d) s.push(d, d == 3 ? 100.0 : 0.0);
  const auto r = hampel_filter(s, 3, 3.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.flagged, 0u);
  EXPECT_THROW(hampel_filter(s, 0, 3.0), InputError);
  EXPECT_THROW(hampel_filter(s, 3, 0.0), InputError);
}

namespace {

// Fraction of ground-truth spike dates flagged by the conditioning's cloud
// (RED up) or shadow (NIR down) pass, the unit in which samples are removed.
struct Recovery {
  std::size_t injected = 0, recovered = 0;
  double rate() const { return injected ? static_cast<double>(recovered) / static_cast<double>(injected) : 0.0; }
  void add(const std::array<ObservationSeries, kNumVariables>& series, const std::vector<int>& spike_days) {
    const auto clouds = hampel_filter(series[static_cast<std::size_t>(Variable::RED)], 3, 3.0, HampelDirection::Up);
    const auto shadows = hampel_filter(series[static_cast<std::size_t>(Variable::NIR)], 3, 3.0, HampelDirection::Down);
    const auto& days = clouds.series.days;
    for (int day : spike_days) {
      const auto i = static_cast<std::size_t>(std::lower_bound(days.begin(), days.end(), day) - days.begin());
      ++injected;
      recovered += !clouds.series.valid[i] || !shadows.series.valid[i];
    }
  }
};

}  // namespace

// 5 sigma spikes on the default generated scenario, phenology included.
TEST(Hampel, RecoversFiveSigmaSpikesOnTheDefaultScenario) {
  synth::ScenarioConfig cfg;
  cfg.contamination.magnitude_sigmas = 5.0;
  Recovery r;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    cfg.seed = seed;
    const auto g = synth::gen_dataset(cfg);
    std::map<std::pair<std::string, int>, std::vector<int>> truth;
    for (const auto& s : g.truth.spikes) truth[{s.foi_id, s.season}].push_back(s.day);
    for (const auto& p : g.dataset.parcels)
      for (const auto& [year, rec] : p.seasons) {
        auto it = truth.find({p.foi_id, year});
        if (it != truth.end()) r.add(rec.series, it->second);
      }
  }
  ASSERT_GT(r.injected, 1000u);
  EXPECT_GE(r.rate(), 0.95) << r.recovered << " of " << r.injected;
}

// Spikes at the generator's default magnitude on a flat canopy.
TEST(Hampel, RecoversDefaultMagnitudeSpikesOnAFlatCanopy) {
  Rng rng(77);
  synth::Phenology flat;
  flat.lai_amp = 0.0;
  flat.lai_base = 1.5;
  Recovery r;
  for (int trial = 0; trial < 600; ++trial) {
    const auto draw = synth::gen_observations(flat, synth::Cadence{}, synth::Contamination{}, synth::NoiseModel{}, rng);
    r.add(draw.series, draw.spike_days);
  }
  ASSERT_GT(r.injected, 500u);
  EXPECT_GE(r.rate(), 0.95) << r.recovered << " of " << r.injected;
}

// ---------------------------------------------------------------------------
// Gap filling and resampling

TEST(GapFill, ReproducesLinearFunctionsAndHoldsEnds) {
  ObservationSeries s;
  s.push(3, std::nan(""), false);
  s.push(10, 1.0);
  s.push(17, 99.0, false);
  s.push(30, 3.0);
  s.push(41, 5.2);
  const auto r = linear_gapfill(s, 2, 0, 50);
  EXPECT_EQ(r.size(), 26u);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const int d = r.day(i);
    double expect = 0;
    if (d <= 10) expect = 1.0;
    else if (d <= 30) expect = 1.0 + (d - 10) * 0.1;
    else if (d <= 41) expect = 3.0 + (d - 30) * 0.2;
    else expect = 5.2;
    EXPECT_NEAR(r.values[i], expect, 1e-12) << "day " << d;
  }
}

TEST(GapFill, NeedsTwoValidSamples) {
  ObservationSeries s;
  s.push(1, 0.5);
  s.push(5, std::nan(""), false);
  EXPECT_THROW(linear_gapfill(s, 2, 0, 10), InputError);
  ObservationSeries bad;
  bad.push(5, 0.1);
  bad.push(5, 0.2);
  EXPECT_THROW(linear_gapfill(bad, 2, 0, 10), InputError);
}

TEST(Resample, LinearOnLinearDataAndIdentityOnTheSameGrid) {
  RegularSeries in{Variable::LAI, 0, 2, {}};
  for (int i = 0; i < 50; ++i) in.values.push_back(0.5 + 0.03 * i);
  const auto same = resample(in, 0, 2, 50);
  EXPECT_EQ(same.values, in.values);
  const auto coarse = resample(in, 4, 4, 20);
  for (std::size_t i = 0; i < coarse.size(); ++i) EXPECT_NEAR(coarse.values[i], 0.5 + 0.03 * (coarse.day(i) / 2.0), 1e-12);
}

// ---------------------------------------------------------------------------
// Whittaker

TEST(Whittaker, MatchesDenseSolve) {
  Rng rng(3);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(rng.integer(3, 160));
    const int d = static_cast<int>(rng.integer(1, 2));
    const double lambda = std::pow(10.0, rng.uniform(-2, 3));
    std::vector<double> y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = std::sin(0.1 * static_cast<double>(i)) + rng.normal(0, 0.2);
      w[i] = rng.bernoulli(0.2) ? 0.0 : rng.uniform(0.1, 1.0);
    }
    w[0] = w[n - 1] = 1.0;
    const auto z = whittaker_solve(y, w, lambda, d);
    const auto ref = oracle::whittaker_dense(y, w, lambda, d);
    for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(z[i] - ref[i]));
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Whittaker, SecondOrderPenaltyKeepsStraightLines) {
  std::vector<double> y, w;
  for (int i = 0; i < 40; ++i) {
    y.push_back(2.0 - 0.05 * i);
    w.push_back(i % 3 == 0 ? 1.0 : 0.2);
  }
  const auto z = whittaker_solve(y, w, 1e4, 2);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(z[i], y[i], 1e-9);
  const auto c = whittaker_solve(std::vector<double>(10, 0.7), std::vector<double>(10, 1.0), 50, 1);
  for (double v : c) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(Whittaker, RoughnessFallsAsLambdaGrows) {
  Rng rng(8);
  std::vector<double> y(80), w(80, 1.0);
  for (auto& v : y) v = rng.normal();
  double prev = std::numeric_limits<double>::infinity();
  for (double lg = -2; lg <= 4; lg += 0.5) {
    const double r = roughness(whittaker_solve(y, w, std::pow(10.0, lg), 2), 2);
    EXPECT_LT(r, prev);
    prev = r;
  }
}

TEST(Whittaker, RejectsDegenerateInput) {
  const std::vector<double> y{1, 2, 3};
  EXPECT_THROW(whittaker_solve(y, std::vector<double>{0, 0, 0}, 1.0, 2), InputError);
  EXPECT_THROW(whittaker_solve(y, std::vector<double>{1, 1, 1}, 0.0, 2), InputError);
  EXPECT_THROW(whittaker_solve(y, std::vector<double>{1, 1}, 1.0, 2), InputError);
  EXPECT_THROW(whittaker_solve(y, std::vector<double>{1, 1, 1}, 1.0, 3), InputError);
}

// Upper-envelope weights push the fit above most samples.
TEST(Expectile, UpperEnvelopeLiesAboveTheSymmetricFit) {
  Rng rng(4);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::sin(0.08 * static_cast<double>(i)) + rng.normal(0, 0.1);
  WhittakerConfig cfg;
  const auto fit = expectile_smooth(y, 10.0, cfg);
  const auto sym = whittaker_solve(y, std::vector<double>(y.size(), 1.0), 10.0, 2);
  EXPECT_TRUE(fit.converged);
  std::size_t below = 0;
  double mean_gap = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    below += y[i] > fit.z[i];
    mean_gap += fit.z[i] - sym[i];
    EXPECT_TRUE(fit.weights[i] == cfg.envelope || fit.weights[i] == 1.0 - cfg.envelope);
  }
  EXPECT_LT(below, y.size() / 2);
  EXPECT_GT(mean_gap, 0.0);
}

TEST(Expectile, ZeroBaseWeightsStayZero) {
  std::vector<double> y{0.1, 0.2, 5.0, 0.3, 0.2, 0.1};
  std::vector<double> base{1, 1, 0, 1, 1, 1};
  WhittakerConfig cfg;
  const auto fit = expectile_smooth(y, 1.0, cfg, base);
  EXPECT_EQ(fit.weights[2], 0.0);
  EXPECT_LT(fit.z[2], 1.0);
}

// The selected lambda is the midpoint of the shortest V-curve segment.
TEST(VCurve, SelectsTheShortestSegmentMidpoint) {
  Rng rng(12);
  WhittakerConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> y(100);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::cos(0.05 * static_cast<double>(i)) + rng.normal(0, 0.15);
    const auto curve = vcurve(y, cfg);
    ASSERT_EQ(curve.size(), static_cast<std::size_t>(cfg.grid_points));
    double best = std::numeric_limits<double>::infinity(), mid = 0;
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
      const double dist = std::sqrt(std::pow(curve[i + 1].log_fidelity - curve[i].log_fidelity, 2) +
                                    std::pow(curve[i + 1].log_roughness - curve[i].log_roughness, 2));
      if (dist < best) {
        best = dist;
        mid = 0.5 * (curve[i].log10_lambda + curve[i + 1].log10_lambda);
      }
    }
    const double lambda = vcurve_select_lambda(y, cfg);
    EXPECT_NEAR(std::log10(lambda), mid, 1e-12);
    EXPECT_GE(std::log10(lambda), cfg.log10_lambda_min);
    EXPECT_LE(std::log10(lambda), cfg.log10_lambda_max);
  }
}

// ---------------------------------------------------------------------------
// Multi-season conditioning

TEST(Conditioning, ProducesOneRegularSeriesPerSeasonAndVariable) {
  Rng rng(2);
  const auto& ww = synth::crop_by_key("ww");
  std::vector<SeasonObservations> seasons;
  for (int s : {0, 1, 3}) {
    auto draw = synth::gen_observations(ww.phenology, {}, {0.05, 8.0}, {}, rng);
    seasons.push_back({s, draw.series});
  }
  ConditioningConfig cfg;
  ConditioningStats stats;
  const auto out = condition_seasons(seasons, cfg, &stats);
  ASSERT_EQ(out.size(), 3u);
  for (std::size_t s = 0; s < out.size(); ++s) {
    EXPECT_EQ(out[s].season_offset, seasons[s].season_offset);
    for (const auto& r : out[s].variables) {
      EXPECT_EQ(r.size(), 92u);
      EXPECT_EQ(r.start_day, 0);
      EXPECT_EQ(r.step_days, 4);
      for (double v : r.values) EXPECT_TRUE(std::isfinite(v));
    }
  }
  for (double l : stats.lambda) {
    EXPECT_GE(std::log10(l), cfg.whittaker.log10_lambda_min - 1e-12);
    EXPECT_LE(std::log10(l), cfg.whittaker.log10_lambda_max + 1e-12);
  }
  std::vector<SeasonObservations> unordered{seasons[1], seasons[0]};
  EXPECT_THROW(condition_seasons(unordered, cfg), InputError);
}

TEST(Conditioning, CloudSpikesAreRemovedBeforeSmoothing) {
  Rng rng(6);
  const auto& sb = synth::crop_by_key("sb");
  auto clean = synth::gen_observations(sb.phenology, {5, 0.0, 0.0}, {0.0, 0.0}, {}, rng);
  auto spiked = clean;
  auto& red = spiked.series[static_cast<std::size_t>(Variable::RED)];
  const std::size_t pos = red.size() / 2;
  for (std::size_t v = 0; v < kNumVariables; ++v) spiked.series[v].values[pos] += v == 2 ? 0.3 : -0.0;
  ConditioningConfig cfg;
  ConditioningStats st;
  const auto a = condition_seasons(std::vector<SeasonObservations>{{0, clean.series}}, cfg);
  const auto b = condition_seasons(std::vector<SeasonObservations>{{0, spiked.series}}, cfg, &st);
  EXPECT_GE(st.cloud_flags, 1u);
  const auto& ra = a[0].variables[2].values;
  const auto& rb = b[0].variables[2].values;
  double worst = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) worst = std::max(worst, std::abs(ra[i] - rb[i]));
  EXPECT_LT(worst, 0.05);
}

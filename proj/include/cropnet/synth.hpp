#pragma once

// Synthetic multi-country parcel datasets with known structure.
//
// Crop universe: 225 leaf codes. The NL-like country uses 141 of them
// (16 majors, 5 permanent crops, 120 rare crops), the FR-like country 151
// (18 majors, 7 permanent, 126 rare), 67 are shared.
//
// Rotations follow a per-regime Markov chain over the majors and permanent
// crops, where a regime is (spatial region, farm type). Rare crops replace
// the label of randomly chosen arable FOIs with an exact per-season quota.
// Signals follow a double-logistic greenness curve per crop with per-FOI
// phase and amplitude jitter, sampled at irregular dates with noise, masked
// (cloudy, NaN) samples and undetected cloud spikes (RED up, NIR down).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cropnet/ingest.hpp"
#include "cropnet/rng.hpp"
#include "cropnet/signal.hpp"
#include "cropnet/taxonomy.hpp"

namespace cropnet::synth {

enum class Country { NL, FR };
enum class CropRole { Major, Permanent, Rare };

inline std::string_view to_string(Country c) { return c == Country::NL ? "NL" : "FR"; }

// Double-logistic greenness in [0, 1]; days since Oct 1.
struct Phenology {
  double lai_base = 0.1;
  double lai_amp = 4.0;
  double sos = 200;  // green-up inflection
  double eos = 300;  // senescence inflection
  double k_up = 10;
  double k_down = 8;
  // Late divergence: from reveal_day on, LAI moves by late_offset with a 8-day time constant.
  // With late_fade_days > 0 the offset tapers linearly to zero over the season's last
  // late_fade_days, so the season ends where the next one starts.
  double reveal_day = -1;
  double late_offset = 0;
  double late_fade_days = 0;

  double greenness(double day) const {
    const double up = 1.0 / (1.0 + std::exp(-(day - sos) / k_up));
    const double down = 1.0 / (1.0 + std::exp(-(day - eos) / k_down));
    return std::max(0.0, up - down);
  }

  double lai(double day, double amp_scale = 1.0) const {
    double v = lai_base + lai_amp * amp_scale * greenness(day);
    if (reveal_day >= 0 && day > reveal_day) {
      double fade = 1.0;
      if (late_fade_days > 0) fade = std::clamp((kSeasonDays - day) / late_fade_days, 0.0, 1.0);
      v += late_offset * (1.0 - std::exp(-(day - reveal_day) / 8.0)) * fade;
    }
    return std::clamp(v, 0.0, 8.0);
  }

  Phenology shifted(double days) const {
    Phenology p = *this;
    p.sos += days;
    p.eos += days;
    return p;
  }
};

struct CropSpec {
  std::string key;  // short mnemonic, unique
  std::string code;
  std::string name;
  CropRole role = CropRole::Major;
  Phenology phenology;
  bool in_nl = false;
  bool in_fr = false;

  bool in(Country c) const { return c == Country::NL ? in_nl : in_fr; }
};

namespace detail {

inline std::string code_str(int a, int b, int c, int d, int e) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d-%02d-%02d-%02d-%02d", a, b, c, d, e);
  return buf;
}

struct FamilyInfo {
  int id;
  const char* name;
  const char* template_key;
};

inline constexpr std::array<FamilyInfo, 6> kFamilies{{{1, "cereals", "ww"},
                                                      {2, "root and tuber crops", "wp"},
                                                      {3, "oilseed crops", "wr"},
                                                      {4, "vegetables", "on"},
                                                      {5, "flowers and bulbs", "tu"},
                                                      {6, "protein crops", "pe"}}};

}  // namespace detail

// Every crop of both countries, in a fixed order.
inline const std::vector<CropSpec>& crop_universe() {
  static const std::vector<CropSpec> universe = [] {
    std::vector<CropSpec> u;
    auto major = [&](const char* key, std::string code, const char* name, Phenology ph, bool nl, bool fr) {
      u.push_back({key, std::move(code), name, CropRole::Major, ph, nl, fr});
    };
    using detail::code_str;
    //                                                           base  amp  sos  eos  kup kdown
    major("ww", code_str(33, 1, 1, 1, 0), "winter wheat", {0.4, 5.0, 160, 285, 12, 8}, true, true);
    major("sw", code_str(33, 1, 1, 2, 0), "spring wheat", {0.1, 4.5, 200, 300, 10, 8}, true, true);
    major("dw", code_str(33, 1, 1, 3, 0), "durum wheat", {0.3, 4.5, 168, 280, 12, 8}, false, true);
    major("wb", code_str(33, 1, 2, 1, 0), "winter barley", {0.4, 4.5, 154, 268, 12, 8}, true, true);
    major("sb", code_str(33, 1, 2, 2, 0), "spring barley", {0.1, 4.0, 194, 290, 10, 8}, true, true);
    major("gm", code_str(33, 1, 3, 1, 0), "grain maize", {0.1, 5.0, 245, 350, 10, 8}, true, true);
    major("sm", code_str(33, 1, 3, 2, 0), "silage maize", {0.1, 5.0, 243, 328, 10, 6}, true, true);
    major("wp", code_str(33, 2, 1, 1, 0), "ware potato", {0.1, 4.5, 230, 322, 8, 8}, true, true);
    major("sp", code_str(33, 2, 1, 2, 0), "seed potato", {0.1, 4.0, 226, 296, 8, 5}, true, false);
    major("bt", code_str(33, 2, 2, 1, 0), "sugar beet", {0.1, 5.0, 240, 372, 12, 10}, true, true);
    major("wr", code_str(33, 3, 1, 1, 0), "winter rapeseed", {0.8, 4.0, 148, 262, 12, 8}, true, true);
    major("sr", code_str(33, 3, 1, 2, 0), "spring rapeseed", {0.1, 3.5, 205, 300, 10, 8}, true, true);
    major("sf", code_str(33, 3, 2, 1, 0), "sunflower", {0.1, 3.5, 236, 326, 10, 8}, false, true);
    major("so", code_str(33, 3, 3, 1, 0), "soybean", {0.1, 4.0, 252, 336, 10, 8}, false, true);
    major("on", code_str(33, 4, 1, 1, 0), "onion", {0.1, 2.0, 215, 315, 12, 8}, true, true);
    major("ca", code_str(33, 4, 2, 1, 0), "carrot", {0.1, 3.0, 236, 360, 12, 10}, true, true);
    major("tu", code_str(33, 5, 1, 1, 0), "tulip", {0.2, 2.5, 160, 236, 8, 6}, true, false);
    major("pe", code_str(33, 6, 1, 1, 0), "field peas", {0.1, 3.5, 200, 284, 10, 8}, false, true);
    major("pg", code_str(35, 1, 1, 0, 0), "permanent grassland", {1.5, 2.5, 180, 330, 20, 20}, true, true);
    major("tg", code_str(35, 1, 2, 0, 0), "temporary grassland", {1.0, 3.0, 172, 318, 15, 15}, true, true);

    auto perm = [&](const char* key, std::string code, const char* name, Phenology ph, bool nl, bool fr) {
      u.push_back({key, std::move(code), name, CropRole::Permanent, ph, nl, fr});
    };
    perm("ap", code_str(34, 1, 1, 0, 0), "apple orchard", {0.8, 2.5, 200, 350, 12, 12}, true, true);
    perm("pr", code_str(34, 1, 2, 0, 0), "pear orchard", {0.8, 2.3, 195, 345, 12, 12}, true, true);
    perm("ch", code_str(34, 1, 3, 0, 0), "cherry orchard", {0.7, 2.2, 190, 330, 12, 12}, true, true);
    perm("be", code_str(34, 2, 1, 0, 0), "berries", {0.5, 2.0, 205, 320, 12, 12}, true, true);
    perm("nu", code_str(34, 2, 2, 0, 0), "tree nursery", {0.6, 2.0, 210, 340, 12, 12}, true, true);
    perm("vi", code_str(34, 3, 1, 0, 0), "vineyard", {0.3, 2.0, 225, 350, 12, 12}, false, true);
    perm("ol", code_str(34, 4, 1, 0, 0), "olive grove", {1.5, 1.0, 200, 340, 20, 20}, false, true);

    auto template_of = [&](const char* key) {
      for (const auto& c : u)
        if (c.key == key) return c.phenology;
      return Phenology{};
    };
    auto rare = [&](std::string key, std::string code, std::string name, Phenology base, std::uint64_t salt, bool nl,
                    bool fr) {
      // Deterministic per-code variation around the family template.
      Rng r(salt);
      base.sos += r.uniform(-25, 25);
      base.eos += r.uniform(-25, 25);
      if (base.eos < base.sos + 40) base.eos = base.sos + 40;
      base.lai_amp *= r.uniform(0.6, 1.2);
      u.push_back({std::move(key), std::move(code), std::move(name), CropRole::Rare, base, nl, fr});
    };
    for (const auto& fam : detail::kFamilies) {
      const Phenology base = template_of(fam.template_key);
      // 19 per family in NL: holder 91 (10 leaves) and 92 (9 leaves); the first 8 are shared with FR.
      for (int k = 0; k < 19; ++k) {
        const int holder = k < 10 ? 91 : 92;
        const int leaf = k < 10 ? k + 1 : k - 9;
        const auto code = code_str(33, fam.id, holder, leaf, 0);
        rare("r" + std::to_string(fam.id) + "n" + std::to_string(k), code,
             std::string(fam.name) + " minor " + std::to_string(k + 1), base, cropnet::detail::fnv1a(code), true, k < 8);
      }
      // 13 FR-only per family under holder 93.
      for (int k = 0; k < 13; ++k) {
        const auto code = code_str(33, fam.id, 93, k + 1, 0);
        rare("r" + std::to_string(fam.id) + "f" + std::to_string(k), code,
             std::string(fam.name) + " regional " + std::to_string(k + 1), base, cropnet::detail::fnv1a(code), false, true);
      }
    }
    // A small NL-only sector whose mass never reaches the threshold.
    for (int k = 0; k < 6; ++k) {
      const auto code = code_str(36, 1, k + 1, 0, 0);
      rare("x" + std::to_string(k), code, "fallow and set-aside " + std::to_string(k + 1), template_of("tg"),
           cropnet::detail::fnv1a(code), true, false);
    }
    return u;
  }();
  return universe;
}

inline const CropSpec& crop_by_key(std::string_view key) {
  for (const auto& c : crop_universe())
    if (c.key == key) return c;
  throw InputError("unknown synthetic crop key " + std::string(key));
}

inline const CropSpec* crop_by_code(std::string_view code) {
  for (const auto& c : crop_universe())
    if (c.code == code) return &c;
  return nullptr;
}

inline std::vector<const CropSpec*> country_crops(Country country) {
  std::vector<const CropSpec*> out;
  for (const auto& c : crop_universe())
    if (c.in(country)) out.push_back(&c);
  return out;
}

// Taxonomy over the whole universe, with named inner nodes; the permanent
// crops sector carries the permanent flag.
inline TaxonomyTree universe_taxonomy() {
  TaxonomyTree t;
  using detail::code_str;
  t.add(CropCode::parse(code_str(33, 0, 0, 0, 0)), "arable crops");
  t.add(CropCode::parse(code_str(34, 0, 0, 0, 0)), "permanent crops", true);
  t.add(CropCode::parse(code_str(35, 0, 0, 0, 0)), "grassland");
  t.add(CropCode::parse(code_str(36, 0, 0, 0, 0)), "other land use");
  for (const auto& fam : detail::kFamilies) {
    t.add(CropCode::parse(code_str(33, fam.id, 0, 0, 0)), fam.name);
    for (int holder = 91; holder <= 93; ++holder)
      t.add(CropCode::parse(code_str(33, fam.id, holder, 0, 0)), std::string(fam.name) + " minor group " +
                                                                    std::to_string(holder - 90));
  }
  const std::map<std::string, std::string> inner{{code_str(33, 1, 1, 0, 0), "wheat"},
                                                 {code_str(33, 1, 2, 0, 0), "barley"},
                                                 {code_str(33, 1, 3, 0, 0), "maize"},
                                                 {code_str(33, 2, 1, 0, 0), "potatoes"},
                                                 {code_str(33, 2, 2, 0, 0), "beets"},
                                                 {code_str(33, 3, 1, 0, 0), "rapeseed"},
                                                 {code_str(33, 3, 2, 0, 0), "sunflower seeds"},
                                                 {code_str(33, 3, 3, 0, 0), "soy"},
                                                 {code_str(33, 4, 1, 0, 0), "bulb vegetables"},
                                                 {code_str(33, 4, 2, 0, 0), "root vegetables"},
                                                 {code_str(33, 5, 1, 0, 0), "bulb flowers"},
                                                 {code_str(33, 6, 1, 0, 0), "peas"},
                                                 {code_str(35, 1, 0, 0, 0), "grass"},
                                                 {code_str(34, 1, 0, 0, 0), "orchards"},
                                                 {code_str(34, 2, 0, 0, 0), "shrubs and nurseries"},
                                                 {code_str(34, 3, 0, 0, 0), "vines"},
                                                 {code_str(34, 4, 0, 0, 0), "olives"},
                                                 {code_str(36, 1, 0, 0, 0), "fallow"}};
  for (const auto& [code, name] : inner) t.add(CropCode::parse(code), name);
  for (const auto& c : crop_universe()) t.add(CropCode::parse(c.code), c.name);
  return t;
}

// ---------------------------------------------------------------------------
// Observations

struct Cadence {
  int step_days = 5;        // revisit interval
  double skip_rate = 0.10;  // acquisition missing entirely
  double mask_rate = 0.25;  // acquired but cloud-masked (valid = 0, value NaN)
};

struct Contamination {
  double rate = 0.03;             // fraction of kept samples carrying an undetected cloud
  double magnitude_sigmas = 8.0;  // spike size in units of the variable's noise sd
};

struct NoiseModel {
  double lai = 0.15;
  double fapar = 0.02;
  double red = 0.008;
  double nir = 0.015;
};

inline double fapar_of(double lai) { return 1.0 - std::exp(-0.5 * lai); }
inline double red_of(double lai, double soil) { return 0.13 + soil - 0.10 * fapar_of(lai); }
inline double nir_of(double lai, double soil) { return 0.16 + soil + 0.32 * fapar_of(lai); }

struct ObservationDraw {
  std::array<ObservationSeries, kNumVariables> series;
  std::vector<int> spike_days;
};

// Samples one season. `amp_scale` and `soil` are per-FOI jitters.
inline ObservationDraw gen_observations(const Phenology& ph, const Cadence& cadence, const Contamination& contamination,
                                        const NoiseModel& noise, Rng& rng, double amp_scale = 1.0, double soil = 0.0) {
  ObservationDraw out;
  for (std::size_t v = 0; v < kNumVariables; ++v) out.series[v].variable = static_cast<Variable>(v);
  const int first = static_cast<int>(rng.integer(0, cadence.step_days - 1));
  const auto lai_i = static_cast<std::size_t>(Variable::LAI);
  const auto fapar_i = static_cast<std::size_t>(Variable::FAPAR);
  const auto red_i = static_cast<std::size_t>(Variable::RED);
  const auto nir_i = static_cast<std::size_t>(Variable::NIR);
  for (int day = first; day < kSeasonDays; day += cadence.step_days) {
    if (rng.bernoulli(cadence.skip_rate)) continue;
    if (rng.bernoulli(cadence.mask_rate)) {
      for (auto& s : out.series) s.push(day, std::numeric_limits<double>::quiet_NaN(), false);
      continue;
    }
    const double lai = ph.lai(day, amp_scale);
    double vals[kNumVariables];
    vals[lai_i] = lai + (noise.lai > 0 ? rng.normal(0, noise.lai) : 0.0);
    vals[fapar_i] = fapar_of(lai) + (noise.fapar > 0 ? rng.normal(0, noise.fapar) : 0.0);
    vals[red_i] = red_of(lai, soil) + (noise.red > 0 ? rng.normal(0, noise.red) : 0.0);
    vals[nir_i] = nir_of(lai, soil) + (noise.nir > 0 ? rng.normal(0, noise.nir) : 0.0);
    if (contamination.rate > 0 && rng.bernoulli(contamination.rate)) {
      const double m = contamination.magnitude_sigmas;
      vals[red_i] += m * noise.red;
      vals[nir_i] -= m * noise.nir;
      vals[lai_i] -= m * noise.lai;
      vals[fapar_i] -= m * noise.fapar;
      out.spike_days.push_back(day);
    }
    vals[lai_i] = std::clamp(vals[lai_i], 0.0, 8.0);
    vals[fapar_i] = std::clamp(vals[fapar_i], 0.0, 1.0);
    vals[red_i] = std::clamp(vals[red_i], 0.0, 1.0);
    vals[nir_i] = std::clamp(vals[nir_i], 0.0, 1.0);
    for (std::size_t v = 0; v < kNumVariables; ++v) out.series[v].push(day, vals[v], true);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rotations

using Matrix = std::vector<std::vector<double>>;

struct TransitionModel {
  std::vector<std::string> states;  // crop codes
  std::vector<Matrix> matrices;     // per regime, rows sum to 1
  Matrix initial;                   // per regime

  void validate() const {
    const std::size_t n = states.size();
    if (matrices.size() != initial.size()) throw InputError("transition model: regime count mismatch");
    auto check_row = [&](const std::vector<double>& row) {
      if (row.size() != n) throw InputError("transition model: row length");
      double s = 0;
      for (double p : row) {
        if (!(p >= 0)) throw InputError("transition model: negative probability");
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-9) throw InputError("transition model: row does not sum to 1");
    };
    for (const auto& m : matrices) {
      if (m.size() != n) throw InputError("transition model: matrix size");
      for (const auto& row : m) check_row(row);
    }
    for (const auto& row : initial) check_row(row);
  }
};

inline std::size_t draw(const std::vector<double>& p, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return i;
  }
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0) return i;
  return 0;
}

// State index sequences, one per FOI.
inline std::vector<std::vector<std::size_t>> gen_rotations(const TransitionModel& model, std::span<const int> regimes,
                                                           std::size_t seasons, Rng& rng) {
  model.validate();
  std::vector<std::vector<std::size_t>> out(regimes.size());
  for (std::size_t f = 0; f < regimes.size(); ++f) {
    const auto r = static_cast<std::size_t>(regimes[f]);
    if (r >= model.matrices.size()) throw InputError("regime out of range");
    auto& seq = out[f];
    seq.reserve(seasons);
    if (seasons == 0) continue;
    seq.push_back(draw(model.initial[r], rng));
    for (std::size_t s = 1; s < seasons; ++s) seq.push_back(draw(model.matrices[r][seq.back()], rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scenarios

struct ScenarioConfig {
  std::string name = "custom";
  Country country = Country::NL;
  std::size_t fois = 200;
  int first_season = 2017;
  std::size_t seasons = 4;
  std::size_t rs_first_season = 1;  // earlier seasons carry crops only
  std::size_t regions = 4;          // quadrants of the square layout
  double density_per_km2 = 0.5;
  bool rare_crops = true;
  std::vector<std::string> crop_keys;  // restrict majors to these keys (empty = all of the country)
  double structure_weight = 0.65;      // successor table vs regional popularity
  double pair_preference = 0.85;       // farm-type preference inside crop pairs
  double region_spread = 0.6;          // log-sd of regional popularity factors
  double phase_jitter_days = 20;
  double amp_jitter = 0.12;
  double soil_jitter = 0.01;
  double reveal_day = -1;  // >= 0: crops identical until this day
  Cadence cadence;
  Contamination contamination;
  NoiseModel noise;
  std::uint64_t seed = 1;
};

inline ScenarioConfig preset(std::string_view name, std::uint64_t seed = 1) {
  ScenarioConfig c;
  c.name = std::string(name);
  c.seed = seed;
  if (name == "tiny") {
    c.fois = 200;
    c.seasons = 4;
    c.first_season = 2017;
    c.rare_crops = false;
    c.density_per_km2 = 0.5;
  } else if (name == "nl-analog") {
    c.fois = 5000;
    c.seasons = 5;
    c.first_season = 2016;
  } else if (name == "fr-analog") {
    c.country = Country::FR;
    c.fois = 6000;
    c.seasons = 5;
    c.first_season = 2016;
  } else if (name == "late-reveal") {
    c.fois = 2500;
    c.seasons = 5;
    c.first_season = 2016;
    c.rare_crops = false;
    c.crop_keys = {"ww", "sb", "gm", "wp", "bt", "on"};
    c.reveal_day = 285;  // last day visible at a cutoff of 18 windows
    c.amp_jitter = 0.03;
  } else {
    throw InputError("unknown preset '" + std::string(name) + "'; valid presets: tiny, nl-analog, fr-analog, late-reveal");
  }
  return c;
}

inline std::vector<std::string> preset_names() { return {"tiny", "nl-analog", "fr-analog", "late-reveal"}; }

// Phenology actually used for a crop under a scenario.
inline Phenology scenario_phenology(const ScenarioConfig& cfg, const CropSpec& crop) {
  if (cfg.reveal_day < 0) return crop.phenology;
  // Shared curve until reveal_day, then a crop-specific LAI offset.
  Phenology p{0.2, 4.0, 200, 340, 10, 8, cfg.reveal_day, 0.0, 30.0};
  const auto& keys = cfg.crop_keys;
  const auto it = std::find(keys.begin(), keys.end(), crop.key);
  const double k = it == keys.end() ? 0.0 : static_cast<double>(it - keys.begin());
  const double n = static_cast<double>(std::max<std::size_t>(keys.size(), 2));
  p.late_offset = -2.0 + 4.0 * k / (n - 1.0);
  return p;
}

// Default crops of interest and grassland (as crop codes, which are also
// their aggregated group ids) for evaluation on generated data.
struct InterestSets {
  std::vector<std::string> interest;
  std::vector<std::string> grassland;
};

inline InterestSets default_interest(const ScenarioConfig& cfg) {
  std::vector<std::string> keys = cfg.crop_keys;
  if (keys.empty())
    keys = cfg.country == Country::NL
               ? std::vector<std::string>{"ww", "sb", "gm", "sm", "wp", "sp", "bt", "on"}
               : std::vector<std::string>{"ww", "dw", "wb", "sb", "gm", "sm", "wp", "bt", "wr", "sf", "so", "pe"};
  InterestSets s;
  for (const auto& k : keys) s.interest.push_back(crop_by_key(k).code);
  for (const char* k : {"pg", "tg"}) s.grassland.push_back(crop_by_key(k).code);
  return s;
}

struct SpikeRecord {
  std::string foi_id;
  int season = 0;
  int day = 0;
};

struct GroundTruth {
  TransitionModel transitions;
  std::vector<int> regimes;  // per FOI, in dataset order
  std::vector<SpikeRecord> spikes;
  std::map<std::string, double> discriminative_day;  // per crop code
  std::size_t injected_samples = 0;                  // kept (non-masked) samples

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["states"] = transitions.states;
    j["transition_matrices"] = transitions.matrices;
    j["initial_distributions"] = transitions.initial;
    j["regimes"] = regimes;
    nlohmann::json sp = nlohmann::json::array();
    for (const auto& s : spikes) sp.push_back({{"foi_id", s.foi_id}, {"season", s.season}, {"day", s.day}});
    j["spikes"] = sp;
    j["discriminative_day"] = discriminative_day;
    j["sampled_observations"] = injected_samples;
    return j;
  }
};

struct Generated {
  Dataset dataset;
  GroundTruth truth;
};

namespace detail {

struct Successor {
  const char* from;
  std::vector<std::pair<const char*, double>> to;
};

// Agronomic successor table over majors (before pair preferences).
inline const std::vector<Successor>& successor_table() {
  static const std::vector<Successor> t{
      {"wp", {{"ww", 0.6}, {"wb", 0.4}}},
      {"sp", {{"ww", 0.5}, {"wb", 0.5}}},
      {"bt", {{"ww", 0.5}, {"sw", 0.3}, {"sb", 0.2}}},
      {"ww", {{"wr", 0.3}, {"gm", 0.3}, {"sm", 0.2}, {"sf", 0.2}}},
      {"wb", {{"wr", 0.5}, {"sm", 0.3}, {"gm", 0.2}}},
      {"dw", {{"sf", 0.5}, {"pe", 0.5}}},
      {"wr", {{"ww", 0.6}, {"wb", 0.4}}},
      {"sr", {{"sw", 0.5}, {"sb", 0.5}}},
      {"gm", {{"sb", 0.4}, {"sw", 0.3}, {"so", 0.3}}},
      {"sm", {{"tg", 0.4}, {"sm", 0.3}, {"gm", 0.3}}},
      {"sw", {{"on", 0.3}, {"ca", 0.3}, {"bt", 0.2}, {"pe", 0.2}}},
      {"sb", {{"wp", 0.35}, {"sp", 0.35}, {"bt", 0.3}}},
      {"so", {{"ww", 0.6}, {"dw", 0.4}}},
      {"pe", {{"ww", 0.5}, {"dw", 0.5}}},
      {"sf", {{"ww", 0.5}, {"dw", 0.5}}},
      {"on", {{"bt", 0.5}, {"tu", 0.5}}},
      {"ca", {{"wp", 0.4}, {"sp", 0.3}, {"tu", 0.3}}},
      {"tu", {{"sp", 0.5}, {"wp", 0.3}, {"on", 0.2}}},
      {"tg", {{"tg", 0.5}, {"gm", 0.25}, {"sm", 0.25}}},
  };
  return t;
}

// Crop pairs whose split is driven by the farm type.
inline const std::vector<std::pair<const char*, const char*>>& crop_pairs() {
  static const std::vector<std::pair<const char*, const char*>> p{{"gm", "sm"}, {"wp", "sp"}, {"ww", "wb"}, {"sw", "sb"}};
  return p;
}

inline const std::map<std::string, double>& base_popularity() {
  static const std::map<std::string, double> p{
      {"ww", 0.12}, {"sw", 0.04}, {"dw", 0.06}, {"wb", 0.06}, {"sb", 0.06}, {"gm", 0.09}, {"sm", 0.10},
      {"wp", 0.10}, {"sp", 0.05}, {"bt", 0.08}, {"wr", 0.05}, {"sr", 0.03}, {"sf", 0.07}, {"so", 0.04},
      {"on", 0.05}, {"ca", 0.04}, {"tu", 0.04}, {"pe", 0.04}, {"tg", 0.09}};
  return p;
}

inline constexpr std::array<double, 4> kFarmTypeShare{0.8, 0.25, 0.65, 0.2};

}  // namespace detail

// Per-regime transition model; regime = region * 2 + farm_type.
inline TransitionModel build_transition_model(const ScenarioConfig& cfg) {
  std::vector<const CropSpec*> majors, perms;
  for (const auto* c : country_crops(cfg.country)) {
    if (c->role == CropRole::Major) {
      if (!cfg.crop_keys.empty() &&
          std::find(cfg.crop_keys.begin(), cfg.crop_keys.end(), c->key) == cfg.crop_keys.end())
        continue;
      majors.push_back(c);
    } else if (c->role == CropRole::Permanent && cfg.crop_keys.empty()) {
      perms.push_back(c);
    }
  }
  TransitionModel m;
  std::map<std::string, std::size_t> idx;
  for (const auto* c : majors) {
    idx[c->key] = m.states.size();
    m.states.push_back(c->code);
  }
  for (const auto* c : perms) {
    idx[c->key] = m.states.size();
    m.states.push_back(c->code);
  }
  const std::size_t n = m.states.size();
  const bool has_pg = idx.count("pg") != 0;

  Rng rng = Rng(cfg.seed).stream(streams::kSynth, 1);
  // Regional popularity factors.
  std::vector<std::vector<double>> region_factor(cfg.regions, std::vector<double>(n, 1.0));
  for (auto& row : region_factor)
    for (double& f : row) f = std::exp(rng.normal(0.0, cfg.region_spread));

  auto normalize = [](std::vector<double>& v) {
    const double s = std::accumulate(v.begin(), v.end(), 0.0);
    if (s > 0)
      for (double& x : v) x /= s;
  };
  auto apply_pairs = [&](std::vector<double>& v, int farm_type) {
    for (const auto& [a, b] : detail::crop_pairs()) {
      if (!idx.count(a) || !idx.count(b)) continue;
      const double mass = v[idx[a]] + v[idx[b]];
      const double pa = farm_type == 0 ? cfg.pair_preference : 1.0 - cfg.pair_preference;
      v[idx[a]] = mass * pa;
      v[idx[b]] = mass * (1.0 - pa);
    }
  };

  for (std::size_t region = 0; region < cfg.regions; ++region)
    for (int farm = 0; farm < 2; ++farm) {
      // Popularity over rotating majors (no permanent grassland, no permanent crops).
      std::vector<double> pop(n, 0.0);
      for (const auto* c : majors) {
        if (c->key == "pg") continue;
        auto it = detail::base_popularity().find(c->key);
        pop[idx[c->key]] = (it == detail::base_popularity().end() ? 0.05 : it->second) * region_factor[region][idx[c->key]];
      }
      normalize(pop);
      apply_pairs(pop, farm);

      Matrix mat(n, std::vector<double>(n, 0.0));
      for (const auto* c : majors) {
        const std::size_t i = idx[c->key];
        if (c->key == "pg") {
          mat[i][i] = 1.0;
          continue;
        }
        std::vector<double> succ(n, 0.0);
        for (const auto& row : detail::successor_table())
          if (row.from == c->key)
            for (const auto& [to, w] : row.to)
              if (idx.count(to) && to != std::string("pg")) succ[idx[to]] += w;
        normalize(succ);
        apply_pairs(succ, farm);
        const bool any = std::accumulate(succ.begin(), succ.end(), 0.0) > 0;
        const double sw = any ? cfg.structure_weight : 0.0;
        for (std::size_t j = 0; j < n; ++j) mat[i][j] = sw * succ[j] + (1.0 - sw) * pop[j];
        normalize(mat[i]);
      }
      for (const auto* c : perms) mat[idx[c->key]][idx[c->key]] = 1.0;

      std::vector<double> init(n, 0.0);
      const double perm_share = perms.empty() ? 0.0 : 0.05;
      const double pg_share = has_pg ? 0.10 : 0.0;
      for (std::size_t j = 0; j < n; ++j) init[j] = (1.0 - perm_share - pg_share) * pop[j];
      if (has_pg) init[idx["pg"]] = pg_share;
      if (!perms.empty()) {
        std::vector<double> pp;
        for (const auto* c : perms) pp.push_back(region_factor[region][idx[c->key]]);
        normalize(pp);
        for (std::size_t k = 0; k < perms.size(); ++k) init[idx[perms[k]->key]] = perm_share * pp[k];
      }
      normalize(init);
      m.matrices.push_back(std::move(mat));
      m.initial.push_back(std::move(init));
    }
  return m;
}

inline std::string foi_name(Country c, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06zu", c == Country::NL ? "NL" : "FR", i + 1);
  return buf;
}

inline Generated gen_dataset(const ScenarioConfig& cfg) {
  if (cfg.fois == 0 || cfg.seasons == 0) throw InputError("scenario needs FOIs and seasons");
  if (cfg.regions != 4) throw InputError("scenario layout supports exactly 4 regions");
  Generated g;
  Dataset& ds = g.dataset;
  ds.country = std::string(to_string(cfg.country));
  ds.taxonomy = universe_taxonomy();
  for (std::size_t s = 0; s < cfg.seasons; ++s) ds.seasons.push_back(cfg.first_season + static_cast<int>(s));

  const Rng root(cfg.seed);
  Rng layout = root.stream(streams::kSynth, 2);
  const double side = std::sqrt(static_cast<double>(cfg.fois) / cfg.density_per_km2);
  const double half = side / 2.0;

  g.truth.transitions = build_transition_model(cfg);
  const auto& tm = g.truth.transitions;

  ds.parcels.resize(cfg.fois);
  g.truth.regimes.resize(cfg.fois);
  for (std::size_t f = 0; f < cfg.fois; ++f) {
    auto& p = ds.parcels[f];
    p.foi_id = foi_name(cfg.country, f);
    const std::size_t region = f % 4;
    p.x_km = (region % 2) * half + layout.uniform(0.0, half);
    p.y_km = static_cast<double>(region / 2) * half + layout.uniform(0.0, half);
    p.area_ha = std::exp(layout.normal(1.0, 0.5));
    const int farm = layout.bernoulli(detail::kFarmTypeShare[region]) ? 0 : 1;
    g.truth.regimes[f] = static_cast<int>(region) * 2 + farm;
  }

  Rng rot_rng = root.stream(streams::kSynth, 3);
  const auto states = gen_rotations(tm, g.truth.regimes, cfg.seasons, rot_rng);
  std::vector<std::vector<std::string>> labels(cfg.fois, std::vector<std::string>(cfg.seasons));
  for (std::size_t f = 0; f < cfg.fois; ++f)
    for (std::size_t s = 0; s < cfg.seasons; ++s) labels[f][s] = tm.states[states[f][s]];

  // Rare crops: exactly one arable FOI per rare code and season.
  if (cfg.rare_crops) {
    Rng rare_rng = root.stream(streams::kSynth, 4);
    std::vector<const CropSpec*> rare;
    for (const auto* c : country_crops(cfg.country))
      if (c->role == CropRole::Rare) rare.push_back(c);
    for (std::size_t s = 0; s < cfg.seasons; ++s) {
      std::vector<std::size_t> eligible;
      for (std::size_t f = 0; f < cfg.fois; ++f) {
        const auto* c = crop_by_code(labels[f][s]);
        if (c && c->role == CropRole::Major && c->key != "pg") eligible.push_back(f);
      }
      if (eligible.size() < rare.size()) throw InputError("too few arable FOIs for the rare-crop quota");
      for (std::size_t k = 0; k < rare.size(); ++k) {
        const auto pick = static_cast<std::size_t>(rare_rng.integer(static_cast<long long>(k),
                                                                    static_cast<long long>(eligible.size() - 1)));
        std::swap(eligible[k], eligible[pick]);
        labels[eligible[k]][s] = rare[k]->code;
      }
    }
  }

  for (std::size_t f = 0; f < cfg.fois; ++f) {
    auto& p = ds.parcels[f];
    Rng obs_rng = root.stream(streams::kSynth, 1000 + f);
    const double soil = cfg.soil_jitter > 0 ? obs_rng.normal(0, cfg.soil_jitter) : 0.0;
    for (std::size_t s = 0; s < cfg.seasons; ++s) {
      SeasonRecord rec;
      rec.crop = labels[f][s];
      const CropSpec* crop = crop_by_code(rec.crop);
      if (s >= cfg.rs_first_season) {
        const double shift = cfg.phase_jitter_days > 0 ? obs_rng.normal(0, cfg.phase_jitter_days) : 0.0;
        const double amp = cfg.amp_jitter > 0 ? std::max(0.3, obs_rng.normal(1.0, cfg.amp_jitter)) : 1.0;
        Phenology ph = scenario_phenology(cfg, *crop);
        // The shared early curve of the late-reveal scenario is jittered like any other;
        // the reveal day itself stays fixed.
        const double reveal = ph.reveal_day;
        ph = ph.shifted(shift);
        ph.reveal_day = reveal;
        auto drawn = gen_observations(ph, cfg.cadence, cfg.contamination, cfg.noise, obs_rng, amp, soil);
        rec.series = std::move(drawn.series);
        rec.has_rs = true;
        for (const auto& s2 : rec.series)
          if (s2.valid_count() < 2) rec.has_rs = false;
        g.truth.injected_samples += rec.series[0].valid_count();
        for (int d : drawn.spike_days) g.truth.spikes.push_back({p.foi_id, ds.seasons[s], d});
      } else {
        for (std::size_t v = 0; v < kNumVariables; ++v) rec.series[v].variable = static_cast<Variable>(v);
      }
      p.seasons.emplace(ds.seasons[s], std::move(rec));
    }
  }

  for (const auto* c : country_crops(cfg.country)) {
    const Phenology ph = scenario_phenology(cfg, *c);
    g.truth.discriminative_day[c->code] = ph.reveal_day >= 0 ? ph.reveal_day : ph.sos;
  }
  return g;
}

// Writes crops.csv, observations.csv, taxonomy.csv and truth.json.
inline void save_generated(const std::filesystem::path& dir, const Generated& g) {
  save_dataset(dir, g.dataset);
  std::ofstream out(dir / "truth.json", std::ios::binary);
  if (!out) throw InputError("cannot write " + (dir / "truth.json").string());
  out << g.truth.to_json().dump(1) << '\n';
}

}  // namespace cropnet::synth

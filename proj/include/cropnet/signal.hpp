#pragma once

// Conditioning of irregular, cloud-contaminated parcel time series into
// regular smoothed series: Hampel outlier flagging, linear gap filling,
// Whittaker smoothing with expectile (asymmetric) weights and V-curve
// selection of the smoothing parameter.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cropnet/error.hpp"

namespace cropnet {

inline constexpr int kSeasonDays = 365;

enum class Variable : int { LAI = 0, FAPAR = 1, RED = 2, NIR = 3 };
inline constexpr std::size_t kNumVariables = 4;
inline constexpr std::array<std::string_view, kNumVariables> kVariableNames{"LAI", "FAPAR", "RED", "NIR"};

inline std::string_view to_string(Variable v) { return kVariableNames[static_cast<std::size_t>(v)]; }

inline Variable parse_variable(std::string_view s) {
  for (std::size_t i = 0; i < kNumVariables; ++i)
    if (kVariableNames[i] == s) return static_cast<Variable>(i);
  throw InputError("unknown variable '" + std::string(s) + "'");
}

// Irregular samples; days are counted from the start of the series' reference
// season and must be strictly increasing.
struct ObservationSeries {
  Variable variable = Variable::LAI;
  std::vector<int> days;
  std::vector<double> values;
  std::vector<bool> valid;

  std::size_t size() const noexcept { return days.size(); }

  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
  }

  void push(int day, double value, bool is_valid = true) {
    days.push_back(day);
    values.push_back(value);
    valid.push_back(is_valid);
  }

  void validate() const {
    if (values.size() != days.size() || valid.size() != days.size())
      throw InputError("observation series columns differ in length");
    for (std::size_t i = 1; i < days.size(); ++i)
      if (days[i] <= days[i - 1]) throw InputError("observation days not strictly increasing at day " + std::to_string(days[i]));
    for (std::size_t i = 0; i < days.size(); ++i)
      if (valid[i] && !std::isfinite(values[i])) throw InputError("non-finite value flagged valid at day " + std::to_string(days[i]));
  }
};

struct RegularSeries {
  Variable variable = Variable::LAI;
  int start_day = 0;
  int step_days = 4;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  int day(std::size_t i) const noexcept { return start_day + static_cast<int>(i) * step_days; }
};

struct WhittakerConfig {
  int difference_order = 2;
  double envelope = 0.9;
  double log10_lambda_min = -1.0;
  double log10_lambda_max = 1.0;
  int interp_step_days = 2;
  int output_step_days = 4;
  int grid_points = 21;
  int max_iterations = 50;
  double weight_tolerance = 1e-3;

  void validate() const {
    if (!(envelope > 0.5 && envelope <= 1.0)) throw InputError("envelope must lie in (0.5, 1]");
    if (!(log10_lambda_min < log10_lambda_max)) throw InputError("empty lambda range");
    if (difference_order < 1 || difference_order > 2) throw InputError("difference order must be 1 or 2");
    if (grid_points < 2) throw InputError("V-curve needs at least two grid points");
  }
};

// ---------------------------------------------------------------------------
// Hampel filter

enum class HampelDirection { Both, Up, Down };

inline constexpr double kMadToSigma = 1.4826;

struct HampelResult {
  ObservationSeries series;
  std::size_t flagged = 0;
  bool degenerate = false;  // too short to filter; returned unchanged
};

namespace detail {

inline double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + n / 2, v.end());
  double hi = v[n / 2];
  if (n % 2 == 1) return hi;
  double lo = *std::max_element(v.begin(), v.begin() + n / 2);
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Flags samples deviating from their window median by more than
// n_sigmas * 1.4826 * MAD. Window statistics run over every finite sample
// regardless of its flag, so the result depends on values only and the
// filter is idempotent. Values are never modified.
inline HampelResult hampel_filter(const ObservationSeries& series, int half_window, double n_sigmas,
                                  HampelDirection direction = HampelDirection::Both) {
  if (half_window < 1) throw InputError("hampel half_window must be >= 1");
  if (!(n_sigmas > 0)) throw InputError("hampel n_sigmas must be > 0");
  series.validate();

  HampelResult out{series, 0, false};
  std::vector<std::size_t> finite;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (std::isfinite(series.values[i])) finite.push_back(i);

  const std::size_t width = 2 * static_cast<std::size_t>(half_window) + 1;
  if (finite.size() < width) {
    out.degenerate = true;
    return out;
  }

  std::vector<double> window, dev;
  const auto hw = static_cast<std::ptrdiff_t>(half_window);
  const auto n = static_cast<std::ptrdiff_t>(finite.size());
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - hw);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n - 1, k + hw);
    window.clear();
    for (std::ptrdiff_t j = lo; j <= hi; ++j) window.push_back(series.values[finite[j]]);
    dev = window;
    const double med = detail::median_inplace(window);
    for (double& d : dev) d = std::abs(d - med);
    const double sigma = kMadToSigma * detail::median_inplace(dev);

    const std::size_t idx = finite[k];
    const double diff = series.values[idx] - med;
    bool outlier = false;
    switch (direction) {
      case HampelDirection::Both: outlier = std::abs(diff) > n_sigmas * sigma; break;
      case HampelDirection::Up: outlier = diff > n_sigmas * sigma; break;
      case HampelDirection::Down: outlier = -diff > n_sigmas * sigma; break;
    }
    if (outlier && out.series.valid[idx]) {
      out.series.valid[idx] = false;
      ++out.flagged;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear gap filling

// Regular grid on [start_day, end_day]; nearest valid value is held beyond
// the first/last valid sample.
inline RegularSeries linear_gapfill(const ObservationSeries& series, int step_days, int start_day, int end_day) {
  if (step_days < 1) throw InputError("step_days must be >= 1");
  if (end_day < start_day) throw InputError("gap-fill span is empty");
  series.validate();
  std::vector<int> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series.valid[i]) {
      xs.push_back(series.days[i]);
      ys.push_back(series.values[i]);
    }
  if (xs.size() < 2) throw InputError("insufficient observations");

  RegularSeries out{series.variable, start_day, step_days, {}};
  std::size_t seg = 0;
  for (int day = start_day; day <= end_day; day += step_days) {
    if (day <= xs.front()) {
      out.values.push_back(ys.front());
    } else if (day >= xs.back()) {
      out.values.push_back(ys.back());
    } else {
      while (xs[seg + 1] < day) ++seg;
      const double t = static_cast<double>(day - xs[seg]) / static_cast<double>(xs[seg + 1] - xs[seg]);
      out.values.push_back(ys[seg] + t * (ys[seg + 1] - ys[seg]));
    }
  }
  return out;
}

// Grid spanning the first to the last timestamp of the series.
inline RegularSeries linear_gapfill(const ObservationSeries& series, int step_days) {
  if (series.size() == 0) throw InputError("insufficient observations");
  return linear_gapfill(series, step_days, series.days.front(), series.days.back());
}

// Linear resampling of a regular series onto another regular grid; the
// boundary value is held outside the source span.
inline RegularSeries resample(const RegularSeries& in, int start_day, int step_days, std::size_t count) {
  if (in.values.empty()) throw InputError("cannot resample an empty series");
  RegularSeries out{in.variable, start_day, step_days, std::vector<double>(count)};
  const double last = static_cast<double>(in.values.size() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double pos = static_cast<double>(start_day + static_cast<int>(i) * step_days - in.start_day) / in.step_days;
    if (pos <= 0) {
      out.values[i] = in.values.front();
    } else if (pos >= last) {
      out.values[i] = in.values.back();
    } else {
      const auto k = static_cast<std::size_t>(pos);
      const double t = pos - static_cast<double>(k);
      out.values[i] = in.values[k] + t * (in.values[k + 1] - in.values[k]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Whittaker smoother

namespace detail {

// Coefficients of the d-th forward difference operator.
inline std::vector<double> difference_stencil(int d) {
  std::vector<double> c{1.0};
  for (int k = 0; k < d; ++k) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t j = 0; j < c.size(); ++j) {
      next[j] -= c[j];
      next[j + 1] += c[j];
    }
    c = std::move(next);
  }
  return c;
}

// Symmetric positive-definite matrix with half bandwidth p, lower band stored
// row by row: band[i * (p + 1) + k] holds A(i, i - k).
class BandedSpd {
 public:
  BandedSpd(std::size_t n, std::size_t p) : n_(n), p_(p), band_(n * (p + 1), 0.0) {}

  std::size_t size() const noexcept { return n_; }
  std::size_t bandwidth() const noexcept { return p_; }
  double& at(std::size_t i, std::size_t k) { return band_[i * (p_ + 1) + k]; }
  double at(std::size_t i, std::size_t k) const { return band_[i * (p_ + 1) + k]; }

  // In-place Cholesky followed by the two triangular solves.
  std::vector<double> solve(std::vector<double> rhs) {
    if (p_ == 1) return solve_with<1>(std::move(rhs));
    if (p_ == 2) return solve_with<2>(std::move(rhs));
    return solve_with<0>(std::move(rhs));
  }

 private:
  // P > 0 fixes the bandwidth at compile time (same operations, unrolled).
  template <std::size_t P>
  std::vector<double> solve_with(std::vector<double> rhs) {
    const std::size_t p = P > 0 ? P : p_;
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t kmax = std::min(p, i);
      for (std::size_t kk = 0; kk <= kmax; ++kk) {
        const std::size_t k = kmax - kk;  // column j = i - k, left to right
        const std::size_t j = i - k;
        double sum = at(i, k);
        const std::size_t mlo = i - kmax;
        for (std::size_t m = mlo; m < j; ++m) sum -= at(i, i - m) * at(j, j - m);
        if (k == 0) {
          if (!(sum > 0)) throw NumericError("banded system is not positive definite");
          at(i, 0) = std::sqrt(sum);
        } else {
          at(i, k) = sum / at(j, 0);
        }
      }
    }
    for (std::size_t i = 0; i < n_; ++i) {
      double s = rhs[i];
      for (std::size_t k = 1; k <= std::min(p, i); ++k) s -= at(i, k) * rhs[i - k];
      rhs[i] = s / at(i, 0);
    }
    for (std::size_t ii = n_; ii-- > 0;) {
      double s = rhs[ii];
      for (std::size_t k = 1; k <= p && ii + k < n_; ++k) s -= at(ii + k, k) * rhs[ii + k];
      rhs[ii] = s / at(ii, 0);
    }
    return rhs;
  }

 private:
  std::size_t n_, p_;
  std::vector<double> band_;
};

}  // namespace detail

// Minimises sum w_i (y_i - z_i)^2 + lambda * ||D_d z||^2.
inline std::vector<double> whittaker_solve(std::span<const double> y, std::span<const double> weights, double lambda, int d) {
  if (!(lambda > 0)) throw InputError("lambda must be > 0");
  if (d < 1 || d > 2) throw InputError("difference order must be 1 or 2");
  if (weights.size() != y.size()) throw InputError("weights and series differ in length");
  const std::size_t n = y.size();
  if (n == 0) return {};
  bool anchored = false;
  for (double w : weights) {
    if (w < 0) throw InputError("weights must be nonnegative");
    anchored = anchored || w > 0;
  }
  if (!anchored) throw InputError("no anchoring weight");

  const auto p = static_cast<std::size_t>(d);
  detail::BandedSpd a(n, p);
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.at(i, 0) = weights[i];
    rhs[i] = weights[i] * y[i];
  }
  const auto stencil = detail::difference_stencil(d);
  std::array<std::array<double, 3>, 3> coef{};
  for (std::size_t u = 0; u <= p; ++u)
    for (std::size_t v = 0; v <= u; ++v) coef[u][v] = lambda * stencil[u] * stencil[v];
  if (n > p) {
    for (std::size_t r = 0; r + p < n; ++r)
      for (std::size_t u = 0; u <= p; ++u)
        for (std::size_t v = 0; v <= u; ++v) a.at(r + u, u - v) += coef[u][v];
  }
  return a.solve(std::move(rhs));
}

inline RegularSeries whittaker_smooth(const RegularSeries& series, double lambda, std::span<const double> weights, int d) {
  RegularSeries out = series;
  out.values = whittaker_solve(series.values, weights, lambda, d);
  return out;
}

inline double roughness(std::span<const double> z, int d) {
  const auto stencil = detail::difference_stencil(d);
  const std::size_t p = stencil.size() - 1;
  double total = 0;
  for (std::size_t r = 0; r + p < z.size(); ++r) {
    double s = 0;
    for (std::size_t u = 0; u <= p; ++u) s += stencil[u] * z[r + u];
    total += s * s;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Expectile weights

inline std::vector<double> asymmetric_weights(std::span<const double> y, std::span<const double> z, double envelope) {
  if (!(envelope > 0.5 && envelope <= 1.0)) throw InputError("envelope must lie in (0.5, 1]");
  if (y.size() != z.size()) throw InputError("series and fit differ in length");
  std::vector<double> w(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) w[i] = y[i] > z[i] ? envelope : 1.0 - envelope;
  return w;
}

struct ExpectileFit {
  std::vector<double> z;
  std::vector<double> weights;
  int iterations = 0;
  bool converged = false;
};

// Fixed-point iteration between the Whittaker fit and the asymmetric weights.
// base_weights (may be empty = all ones) gate which samples anchor the fit.
inline ExpectileFit expectile_smooth(std::span<const double> y, double lambda, const WhittakerConfig& cfg,
                                     std::span<const double> base_weights = {}) {
  const std::size_t n = y.size();
  std::vector<double> base(base_weights.begin(), base_weights.end());
  if (base.empty()) base.assign(n, 1.0);
  if (base.size() != n) throw InputError("base weights and series differ in length");

  ExpectileFit fit;
  fit.weights = base;
  for (fit.iterations = 1; fit.iterations <= cfg.max_iterations; ++fit.iterations) {
    fit.z = whittaker_solve(y, fit.weights, lambda, cfg.difference_order);
    auto next = asymmetric_weights(y, fit.z, cfg.envelope);
    double change = 0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] *= base[i];
      change = std::max(change, std::abs(next[i] - fit.weights[i]));
    }
    fit.weights = std::move(next);
    if (change < cfg.weight_tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.iterations = std::min(fit.iterations, cfg.max_iterations);
  return fit;
}

// ---------------------------------------------------------------------------
// V-curve

struct VCurvePoint {
  double log10_lambda = 0;
  double log_fidelity = 0;
  double log_roughness = 0;
};

inline std::vector<double> lambda_grid(const WhittakerConfig& cfg) {
  std::vector<double> g(static_cast<std::size_t>(cfg.grid_points));
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = cfg.log10_lambda_min +
           (cfg.log10_lambda_max - cfg.log10_lambda_min) * static_cast<double>(i) / static_cast<double>(g.size() - 1);
  return g;
}

// Evaluates (log fidelity, log roughness) of the converged expectile fit at
// every grid point. Returns an empty curve when the series is degenerate.
inline std::vector<VCurvePoint> vcurve(std::span<const double> y, const WhittakerConfig& cfg) {
  cfg.validate();
  std::vector<VCurvePoint> curve;
  for (double lg : lambda_grid(cfg)) {
    const auto fit = expectile_smooth(y, std::pow(10.0, lg), cfg);
    double fid = 0;
    for (std::size_t i = 0; i < y.size(); ++i) fid += fit.weights[i] * (y[i] - fit.z[i]) * (y[i] - fit.z[i]);
    const double rough = roughness(fit.z, cfg.difference_order);
    if (!(fid > 0) || !(rough > 0) || !std::isfinite(fid) || !std::isfinite(rough)) return {};
    curve.push_back({lg, std::log(fid), std::log(rough)});
  }
  return curve;
}

// Picks the segment of the V-curve with the shortest length and returns the
// lambda at its midpoint (in log10 space).
inline double vcurve_select_lambda(std::span<const double> y, const WhittakerConfig& cfg) {
  const auto curve = vcurve(y, cfg);
  if (curve.size() < 2) return std::pow(10.0, cfg.log10_lambda_min);
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const double df = curve[i + 1].log_fidelity - curve[i].log_fidelity;
    const double dr = curve[i + 1].log_roughness - curve[i].log_roughness;
    const double dist = std::hypot(df, dr);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return std::pow(10.0, 0.5 * (curve[best].log10_lambda + curve[best + 1].log10_lambda));
}

inline double vcurve_select_lambda(const RegularSeries& series, const WhittakerConfig& cfg) {
  return vcurve_select_lambda(std::span<const double>(series.values), cfg);
}

// ---------------------------------------------------------------------------
// Full conditioning chain for one parcel

struct ConditioningConfig {
  int hampel_half_window = 3;
  double hampel_sigmas = 3.0;
  WhittakerConfig whittaker;
  int season_samples = (kSeasonDays + 3) / 4;  // 92 on the 4-day grid
};

// Observations of one season, days counted from that season's Oct 1.
struct SeasonObservations {
  int season_offset = 0;  // position of the season within the parcel's history
  std::array<ObservationSeries, kNumVariables> variables;
};

struct ConditionedSeason {
  int season_offset = 0;
  std::array<RegularSeries, kNumVariables> variables;
};

struct ConditioningStats {
  std::size_t cloud_flags = 0;
  std::size_t shadow_flags = 0;
  std::array<double, kNumVariables> lambda{};
};

// Concatenates the seasons without interruption, removes dates flagged as
// cloud (upward RED excursion) or shadow (downward NIR excursion) from all
// four variables, gap-fills at 2 days, smooths with V-curve selected lambda
// and upper-envelope weights, and cuts per-season 4-day series.
inline std::vector<ConditionedSeason> condition_seasons(std::span<const SeasonObservations> seasons,
                                                        const ConditioningConfig& cfg,
                                                        ConditioningStats* stats = nullptr) {
  if (seasons.empty()) return {};
  cfg.whittaker.validate();
  for (std::size_t s = 1; s < seasons.size(); ++s)
    if (seasons[s].season_offset <= seasons[s - 1].season_offset) throw InputError("seasons out of order");

  std::array<ObservationSeries, kNumVariables> joined;
  for (std::size_t v = 0; v < kNumVariables; ++v) {
    joined[v].variable = static_cast<Variable>(v);
    for (const auto& s : seasons) {
      const auto& src = s.variables[v];
      src.validate();
      for (std::size_t i = 0; i < src.size(); ++i)
        joined[v].push(s.season_offset * kSeasonDays + src.days[i], src.values[i], src.valid[i]);
    }
  }

  const auto red = static_cast<std::size_t>(Variable::RED);
  const auto nir = static_cast<std::size_t>(Variable::NIR);
  const auto clouds = hampel_filter(joined[red], cfg.hampel_half_window, cfg.hampel_sigmas, HampelDirection::Up);
  const auto shadows = hampel_filter(joined[nir], cfg.hampel_half_window, cfg.hampel_sigmas, HampelDirection::Down);
  std::vector<int> bad_days;
  for (const auto* r : {&clouds, &shadows})
    for (std::size_t i = 0; i < r->series.size(); ++i)
      if (!r->series.valid[i] && std::isfinite(r->series.values[i])) bad_days.push_back(r->series.days[i]);
  std::sort(bad_days.begin(), bad_days.end());
  if (stats) {
    stats->cloud_flags = clouds.flagged;
    stats->shadow_flags = shadows.flagged;
  }
  for (auto& series : joined)
    for (std::size_t i = 0; i < series.size(); ++i)
      if (std::binary_search(bad_days.begin(), bad_days.end(), series.days[i])) series.valid[i] = false;

  const int start = seasons.front().season_offset * kSeasonDays;
  const int end = (seasons.back().season_offset + 1) * kSeasonDays - 1;
  std::vector<ConditionedSeason> out(seasons.size());
  for (std::size_t s = 0; s < seasons.size(); ++s) out[s].season_offset = seasons[s].season_offset;

  for (std::size_t v = 0; v < kNumVariables; ++v) {
    const auto filled = linear_gapfill(joined[v], cfg.whittaker.interp_step_days, start, end);
    const double lambda = vcurve_select_lambda(filled, cfg.whittaker);
    if (stats) stats->lambda[v] = lambda;
    RegularSeries smooth = filled;
    smooth.values = expectile_smooth(filled.values, lambda, cfg.whittaker).z;
    for (std::size_t s = 0; s < seasons.size(); ++s)
      out[s].variables[v] = resample(smooth, seasons[s].season_offset * kSeasonDays, cfg.whittaker.output_step_days,
                                     static_cast<std::size_t>(cfg.season_samples));
  }
  // Per-season series are reported with days relative to their own Oct 1.
  for (auto& s : out)
    for (auto& r : s.variables) r.start_day = 0;
  return out;
}

}  // namespace cropnet

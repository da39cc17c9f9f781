#pragma once

// Run configuration file: "key = value" lines, '#' starts a comment. One file
// drives the model dimensions, training, splits, few-shot plan and the
// evaluation levels. Unknown keys and malformed values are parse errors
// carrying the line number.

#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cropnet/csv.hpp"
#include "cropnet/model.hpp"
#include "cropnet/train.hpp"

namespace cropnet {

struct RunConfig {
  ModelSpec model;  // variant, vocab and classes are filled in at run time
  TrainConfig train;
  SplitPolicy split;
  FewShotPlan fewshot;
  double aggregation_threshold = 0.003;  // fraction of the season's FOIs
  std::vector<std::string> interest;     // aggregated group ids; empty = dataset default
  std::vector<std::string> grassland;
  bool has_interest = false;
  bool has_grassland = false;

  // Canonical "key = value" dump (sorted keys), used for hashing.
  std::string canonical() const {
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : model.to_kv())
      if (k != "variant" && k != "vocab" && k != "classes") kv[k] = v;
    for (const auto& [k, v] : train.to_kv()) kv[k] = v;
    kv["split"] = std::string(to_string(split.mode));
    kv["holdout_fraction"] = csv::format(split.holdout_fraction);
    kv["first_target"] = std::to_string(split.first_target);
    std::string n;
    for (int e : fewshot.exponents) n += (n.empty() ? "" : ",") + std::to_string(e);
    kv["fewshot_exponents"] = n;
    kv["aggregation_threshold"] = csv::format(aggregation_threshold);
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
      return s;
    };
    if (has_interest) kv["coi"] = join(interest);
    if (has_grassland) kv["grassland"] = join(grassland);
    std::ostringstream os;
    for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
    return os.str();
  }
};

namespace detail {

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : csv::split(s))
    if (!part.empty()) out.emplace_back(part);
  return out;
}

}  // namespace detail

inline RunConfig parse_run_config(std::istream& in) {
  RunConfig c;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto body = csv::trim(std::string_view(line).substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected key = value", no);
    const std::string key(csv::trim(body.substr(0, eq)));
    const std::string value(csv::trim(body.substr(eq + 1)));
    auto integer = [&]() -> long long {
      long long v = 0;
      const auto r = std::from_chars(value.data(), value.data() + value.size(), v);
      if (r.ec != std::errc() || r.ptr != value.data() + value.size() || v < 0)
        throw ParseError(key + ": '" + value + "' is not a non-negative integer", no);
      return v;
    };
    auto real = [&]() {
      char* end = nullptr;
      const double v = std::strtod(value.c_str(), &end);
      if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(v))
        throw ParseError(key + ": '" + value + "' is not a number", no);
      return v;
    };
    auto boolean = [&]() {
      if (value == "true" || value == "1") return true;
      if (value == "false" || value == "0") return false;
      throw ParseError(key + ": '" + value + "' is not true/false", no);
    };
    auto dim = [&]() {
      const long long v = integer();
      if (v < 1 || v > 1 << 16) throw ParseError(key + " must be in 1..65536", no);
      return static_cast<int>(v);
    };
    try {
      if (key == "embed_dim") c.model.embed_dim = dim();
      else if (key == "rnn_dim") c.model.rnn_dim = dim();
      else if (key == "rs_proj_dim") c.model.rs_proj_dim = dim();
      else if (key == "stacked") c.model.stacked = dim();
      else if (key == "intra_dim") c.model.intra_dim = dim();
      else if (key == "att_dim") c.model.att_dim = dim();
      else if (key == "batch_size") c.train.batch_size = static_cast<std::size_t>(integer());
      else if (key == "epochs") c.train.epochs = static_cast<std::size_t>(integer());
      else if (key == "lr") c.train.adam.lr = real();
      else if (key == "augment") c.train.augment = boolean();
      else if (key == "min_crop") c.train.min_crop = static_cast<std::size_t>(integer());
      else if (key == "max_crop") c.train.max_crop = static_cast<std::size_t>(integer());
      else if (key == "max_history") c.train.max_history = static_cast<std::size_t>(integer());
      else if (key == "seed") c.train.seed = static_cast<std::uint64_t>(integer());
      else if (key == "split") c.split.mode = parse_split_mode(value);
      else if (key == "holdout_fraction") c.split.holdout_fraction = real();
      else if (key == "first_target") c.split.first_target = static_cast<std::size_t>(integer());
      else if (key == "fewshot_exponents") {
        c.fewshot.exponents.clear();
        for (const auto& e : detail::split_list(value)) {
          const int n = std::stoi(e);
          if (n < 0 || n > 30) throw ParseError("few-shot exponent out of range", no);
          c.fewshot.exponents.push_back(n);
        }
      } else if (key == "aggregation_threshold") c.aggregation_threshold = real();
      else if (key == "coi") {
        c.interest = detail::split_list(value);
        c.has_interest = true;
      } else if (key == "grassland") {
        c.grassland = detail::split_list(value);
        c.has_grassland = true;
      } else throw ParseError("unknown key '" + key + "'", no);
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(key + ": " + e.what(), no);
    }
  }
  c.train.validate();
  if (!(c.aggregation_threshold > 0 && c.aggregation_threshold < 1))
    throw InputError("aggregation_threshold must lie in (0, 1)");
  return c;
}

inline RunConfig parse_run_config(std::string_view text) {
  std::istringstream is{std::string(text)};
  return parse_run_config(is);
}

}  // namespace cropnet

// cropnet: one subcommand per pipeline stage.
//
//   synth      generate a synthetic dataset from a preset
//   smooth     condition observations into regular 4-day series
//   featurize  season features (672 per FOI and season)
//   aggregate  taxonomy aggregation map from one season's label counts
//   train      train one model variant, write checkpoint, history, test metrics
//   eval       metrics, confusion matrix and early-season curve for a checkpoint
//   fewshot    pretrain on a source dataset, few-shot transfer to a target
//
// Exit codes: 0 success, 1 runtime error, 2 usage error or unknown variant,
// 3 malformed input file (message carries the line number).

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "cropnet/cropnet.hpp"

namespace fs = std::filesystem;
using namespace cropnet;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitParse = 3;

std::string hex(const unsigned char* p, unsigned n) {
  std::ostringstream os;
  for (unsigned i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(p[i]);
  return os.str();
}

std::string sha256_bytes(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned n = 0;
  if (EVP_Digest(data.data(), data.size(), md, &n, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  return hex(md, n);
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned n = 0;
  EVP_DigestFinal_ex(ctx, md, &n);
  EVP_MD_CTX_free(ctx);
  return hex(md, n);
}

// Options shared by every subcommand.
struct Common {
  std::string config;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string out_dir;
};

fs::path resolve_out(const Common& c, const std::string& command) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (const char* root = std::getenv("CROPNET_OUT"); root && *root) return fs::path(root) / command;
  return fs::path("cropnet-out") / command;
}

RunConfig load_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  try {
    return parse_run_config(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.message(), e.line());
  }
}

// Records inputs, settings and outputs of one command run.
class Manifest {
 public:
  Manifest(std::string command, const Common& c, fs::path out)
      : command_(std::move(command)), out_(std::move(out)), start_(std::chrono::steady_clock::now()) {
    j_["command"] = command_;
    j_["seed"] = c.seed;
    j_["threads"] = c.threads;
    j_["artifact_version"] = CROPNET_VERSION;
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
    j_["settings"] = json::object();
  }

  void input(const fs::path& p) {
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() != ".json") input(e.path());
      return;
    }
    j_["inputs"][p.string()] = sha256_file(p);
  }
  void config(const RunConfig& cfg) { j_["config_hash"] = sha256_bytes(cfg.canonical()); }
  void setting(const std::string& k, json v) { j_["settings"][k] = std::move(v); }
  fs::path output(const std::string& name) {
    outputs_.push_back(out_ / name);
    return outputs_.back();
  }

  void write() {
    for (const auto& p : outputs_) j_["outputs"][p.string()] = sha256_file(p);
    j_["wall_clock_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    std::ofstream os(out_ / "manifest.json", std::ios::binary);
    os << j_.dump(1) << '\n';
  }

 private:
  std::string command_;
  fs::path out_;
  std::chrono::steady_clock::time_point start_;
  std::vector<fs::path> outputs_;
  json j_;
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw InputError("cannot write " + p.string());
  return os;
}

FeatureTable load_features(const Dataset& ds, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    const auto rows = read_features(in);
    return from_season_features(ds, rows);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.message(), e.line());
  }
}

Dataset load_data(const fs::path& dir) {
  try {
    return load_dataset(dir);
  } catch (const ParseError& e) {
    throw ParseError(dir.string() + ": " + e.message(), e.line());
  }
}

// Crops-of-interest levels: explicit config lists, or the generator's defaults
// for the dataset's country, kept only where they are aggregated groups.
LevelSpec level_spec(const Dataset& ds, const RunConfig& cfg) {
  LevelSpec spec;
  spec.aggregation = aggregation_for(ds, ds.seasons[ds.seasons.size() - 2], cfg.aggregation_threshold);
  auto defaults = synth::default_interest(synth::preset(ds.country == "FR" ? "fr-analog" : "nl-analog"));
  const auto& interest = cfg.has_interest ? cfg.interest : defaults.interest;
  const auto& grass = cfg.has_grassland ? cfg.grassland : defaults.grassland;
  for (const auto& g : interest)
    if (spec.aggregation.find_group(g)) spec.interest.insert(g);
  for (const auto& g : grass)
    if (spec.aggregation.find_group(g)) spec.grassland.insert(g);
  return spec;
}

json split_json(const SplitPolicy& p) {
  return {{"mode", std::string(to_string(p.mode))},
          {"holdout_fraction", p.holdout_fraction},
          {"first_target", p.first_target},
          {"seed", p.seed}};
}

SplitPolicy split_from_json(const json& j) {
  SplitPolicy p;
  p.mode = parse_split_mode(j.at("mode").get<std::string>());
  p.holdout_fraction = j.at("holdout_fraction").get<double>();
  p.first_target = j.at("first_target").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

void write_report(const fs::path& path, const MetricsReport& r) {
  auto os = open_out(path);
  write_metrics(os, r);
}

std::vector<std::size_t> parse_cutoffs(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& part : detail::split_list(s)) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(static_cast<std::size_t>(std::stoul(part)));
      } else {
        const auto a = std::stoul(part.substr(0, dash)), b = std::stoul(part.substr(dash + 1));
        for (auto t = a; t <= b; ++t) out.push_back(t);
      }
    } catch (const std::exception&) {
      throw InputError("bad cutoff list '" + s + "'");
    }
  }
  for (auto t : out)
    if (t < 1 || t > kNumWindows) throw InputError("cutoffs must lie in 1..24");
  return out;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string preset = "tiny";
  std::size_t fois = 0;
};

void cmd_synth(const Common& c, const SynthArgs& a) {
  auto cfg = synth::preset(a.preset, c.seed);
  if (a.fois) cfg.fois = a.fois;
  const auto out = resolve_out(c, "synth");
  fs::create_directories(out);
  Manifest m("synth", c, out);
  m.setting("preset", a.preset);
  m.setting("fois", cfg.fois);
  const auto g = synth::gen_dataset(cfg);
  synth::save_generated(out, g);
  for (const char* f : {kCropsFile, kObservationsFile, kTaxonomyFile, "truth.json"}) m.output(f);
  m.write();
  std::cout << "wrote " << g.dataset.parcels.size() << " FOIs x " << g.dataset.seasons.size() << " seasons to "
            << out.string() << '\n';
}

struct DataArgs {
  std::string data;
  std::string features;
  std::string smoothed;
};

void cmd_smooth(const Common& c, const DataArgs& a) {
  const Dataset ds = load_data(a.data);
  const auto out = resolve_out(c, "smooth");
  fs::create_directories(out);
  Manifest m("smooth", c, out);
  m.input(a.data);
  const ConditioningConfig cond;
  std::vector<std::vector<RegularRow>> per(ds.parcels.size());
  parallel_for(ds.parcels.size(), c.threads, [&](std::size_t f) {
    std::vector<char> have;
    const auto series = condition_parcel(ds.parcels[f], ds.seasons, cond, have);
    for (std::size_t s = 0; s < ds.seasons.size(); ++s)
      if (have[s])
        for (const auto& r : series[s]) per[f].push_back({ds.parcels[f].foi_id, ds.seasons[s], r});
  });
  std::vector<RegularRow> rows;
  for (auto& v : per) rows.insert(rows.end(), v.begin(), v.end());
  auto os = open_out(m.output("smoothed.csv"));
  write_regular(os, rows);
  os.close();
  m.write();
  std::cout << "wrote " << rows.size() << " smoothed series\n";
}

void cmd_featurize(const Common& c, const DataArgs& a) {
  const Dataset ds = load_data(a.data);
  const auto out = resolve_out(c, "featurize");
  fs::create_directories(out);
  Manifest m("featurize", c, out);
  m.input(a.data);
  std::vector<SeasonFeatures> rows;
  if (!a.smoothed.empty()) {
    m.input(a.smoothed);
    std::ifstream in(a.smoothed);
    if (!in) throw InputError("cannot open " + a.smoothed);
    const ConditioningConfig cond;
    std::vector<RegularRow> reg;
    try {
      reg = read_regular(in, static_cast<std::size_t>(cond.season_samples));
    } catch (const ParseError& e) {
      throw ParseError(a.smoothed + ": " + e.message(), e.line());
    }
    std::map<std::pair<std::string, int>, std::array<RegularSeries, kNumVariables>> grouped;
    std::map<std::pair<std::string, int>, int> seen;
    for (auto& r : reg) {
      const auto key = std::make_pair(r.foi_id, r.season);
      grouped[key][static_cast<std::size_t>(r.series.variable)] = std::move(r.series);
      ++seen[key];
    }
    for (const auto& p : ds.parcels)
      for (int season : ds.seasons) {
        const auto key = std::make_pair(p.foi_id, season);
        auto it = grouped.find(key);
        if (it == grouped.end()) continue;
        if (seen[key] != static_cast<int>(kNumVariables))
          throw InputError("smoothed series for " + p.foi_id + "/" + std::to_string(season) + " lack a variable");
        auto sf = season_features(it->second);
        sf.foi_id = p.foi_id;
        sf.season = season;
        rows.push_back(std::move(sf));
      }
  } else {
    FeaturizeStats st;
    rows = to_season_features(featurize(ds, ConditioningConfig{}, c.threads, &st));
    std::cout << "conditioned " << st.conditioned_fois << " FOIs (" << st.failed_fois << " failed), flagged "
              << st.cloud_flags << " cloud and " << st.shadow_flags << " shadow dates\n";
  }
  auto os = open_out(m.output("features.csv"));
  write_features(os, rows);
  os.close();
  m.write();
  std::cout << "wrote " << rows.size() << " feature rows\n";
}

struct AggregateArgs {
  std::string data;
  int season = 0;
};

void cmd_aggregate(const Common& c, const AggregateArgs& a) {
  const Dataset ds = load_data(a.data);
  const RunConfig cfg = load_config(c.config);
  const auto out = resolve_out(c, "aggregate");
  fs::create_directories(out);
  Manifest m("aggregate", c, out);
  m.input(a.data);
  m.config(cfg);
  const int season = a.season ? a.season : ds.seasons.at(ds.seasons.size() >= 2 ? ds.seasons.size() - 2 : 0);
  ds.season_index(season);
  m.setting("season", season);
  const auto map = aggregation_for(ds, season, cfg.aggregation_threshold);
  {
    auto os = open_out(m.output("aggregation.csv"));
    write_aggregation(os, map);
  }
  {
    auto os = open_out(m.output("groups.csv"));
    os << "group_code,group_name,kind,count\n";
    for (const auto& g : map.groups)
      os << g.id << ',' << g.name << ','
         << (g.kind == GroupKind::Retained ? "retained" : g.kind == GroupKind::Permanent ? "permanent" : "others") << ','
         << g.count << '\n';
  }
  m.write();
  std::cout << map.groups.size() << " groups at threshold " << map.threshold << " FOIs\n";
}

struct TrainArgs {
  DataArgs data;
  std::string variant;
};

void cmd_train(const Common& c, const TrainArgs& a) {
  const Variant variant = parse_variant(a.variant);
  RunConfig cfg = load_config(c.config);
  cfg.train.seed = c.seed;
  cfg.split.seed = c.seed;
  const Dataset ds = load_data(a.data.data);
  const auto out = resolve_out(c, "train");
  fs::create_directories(out);
  Manifest m("train", c, out);
  m.input(a.data.data);
  m.input(a.data.features);
  m.config(cfg);
  m.setting("variant", a.variant);

  const CropVocab vocab = build_vocab(ds);
  Experiment e = make_experiment(ds, load_features(ds, a.data.features), vocab, cfg.split);
  ModelSpec spec = cfg.model;
  spec.variant = variant;
  spec.vocab = static_cast<int>(vocab.size());
  spec.classes = static_cast<int>(vocab.size());
  Model model(spec, c.seed);
  const auto h = train_model(model, e.data, e.splits.train, e.splits.val, cfg.train);

  json meta = checkpoint_meta(model, e.data, cfg.train, h);
  meta["split"] = split_json(cfg.split);
  save_model(m.output("checkpoint.json"), model, meta);
  {
    auto os = open_out(m.output("history.csv"));
    write_history(os, h);
  }
  const auto pred = predict_samples(model, e.data, e.splits.test, BatchOptions{kNumWindows, cfg.train.max_history});
  const auto report = compute_report(codes_of(vocab, sample_labels(e.data, e.splits.test)), codes_of(vocab, pred),
                                     level_spec(ds, cfg));
  write_report(m.output("metrics.csv"), report);
  m.write();
  std::cout << to_string(variant) << ": best epoch " << h.best_epoch << ", test accuracy "
            << report.at(Level::All).accuracy << '\n';
}

struct EvalArgs {
  DataArgs data;
  std::string checkpoint;
  std::string level = "every";
  std::string cutoff;
};

void cmd_eval(const Common& c, const EvalArgs& a) {
  std::optional<Level> only;
  if (a.level != "every") only = parse_level(a.level);
  const auto cutoffs = a.cutoff.empty() ? std::vector<std::size_t>{} : parse_cutoffs(a.cutoff);
  const RunConfig cfg = load_config(c.config);
  const Dataset ds = load_data(a.data.data);
  const auto out = resolve_out(c, "eval");
  fs::create_directories(out);
  Manifest m("eval", c, out);
  m.input(a.data.data);
  m.input(a.data.features);
  m.input(a.checkpoint);
  m.config(cfg);
  m.setting("level", a.level);
  m.setting("cutoff", a.cutoff);

  auto loaded = load_model(a.checkpoint);
  const CropVocab vocab = vocab_from_meta(loaded.meta);
  const std::size_t max_history = loaded.meta.value("max_history", std::size_t{0});
  const SplitPolicy policy = loaded.meta.contains("split") ? split_from_json(loaded.meta.at("split")) : cfg.split;
  PreparedData d = prepare(ds, load_features(ds, a.data.features), vocab, ds.seasons[ds.seasons.size() - 2]);
  d.norm = norm_from_meta(loaded.meta);
  apply_normalization(d.features, d.norm);
  const Splits splits = make_splits(d, policy);
  const LevelSpec spec = level_spec(ds, cfg);

  const auto truth = codes_of(vocab, sample_labels(d, splits.test));
  const auto pred = codes_of(vocab, predict_samples(loaded.model, d, splits.test, BatchOptions{kNumWindows, max_history}));
  MetricsReport report = compute_report(truth, pred, spec);
  if (only) report.levels = {report.at(*only)};
  write_report(m.output("metrics.csv"), report);

  const Level cm_level = only && *only != Level::InterestOnly ? *only : Level::Aggregated;
  std::vector<std::string> t, p;
  std::set<std::string> classes;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    t.push_back(spec.project(truth[i], cm_level));
    p.push_back(spec.project(pred[i], cm_level));
    classes.insert(t.back());
    classes.insert(p.back());
  }
  const auto cm = confusion(t, p, {classes.begin(), classes.end()});
  {
    auto os = open_out(m.output("confusion.csv"));
    write_confusion(os, cm);
  }
  {
    auto os = open_out(m.output("confusion_normalized.csv"));
    write_confusion_normalized(os, cm);
  }
  if (!cutoffs.empty()) {
    auto curve = early_season_curve(loaded.model, d, splits.test, spec, cutoffs, max_history);
    if (only)
      for (auto& pt : curve) pt.report.levels = {pt.report.at(*only)};
    auto os = open_out(m.output("curve.csv"));
    write_curve(os, curve);
  }
  m.write();
  for (const auto& l : report.levels)
    std::cout << to_string(l.level) << ": macro F1 " << l.macro_f1 << ", "
              << (l.level == Level::InterestOnly ? "micro F1 " : "accuracy ")
              << (l.level == Level::InterestOnly ? l.micro_f1 : l.accuracy) << '\n';
}

struct FewShotArgs {
  DataArgs source;
  DataArgs target;
  std::string variant = "HierE_final";
  std::string source_checkpoint;
};

void cmd_fewshot(const Common& c, const FewShotArgs& a) {
  const Variant variant = parse_variant(a.variant);
  RunConfig cfg = load_config(c.config);
  cfg.train.seed = c.seed;
  cfg.split.seed = c.seed;
  cfg.fewshot.seed = c.seed;
  const Dataset src = load_data(a.source.data);
  const Dataset tgt = load_data(a.target.data);
  const auto out = resolve_out(c, "fewshot");
  fs::create_directories(out);
  Manifest m("fewshot", c, out);
  for (const auto* p : {&a.source.data, &a.source.features, &a.target.data, &a.target.features}) m.input(*p);
  m.config(cfg);
  m.setting("variant", a.variant);

  const Dataset* both[] = {&src, &tgt};
  const CropVocab vocab = build_vocab(both);
  Experiment se = make_experiment(src, load_features(src, a.source.features), vocab, cfg.split);

  std::optional<Model> pretrained;
  if (!a.source_checkpoint.empty()) {
    m.input(a.source_checkpoint);
    auto loaded = load_model(a.source_checkpoint);
    require_same_vocab(vocab_from_meta(loaded.meta), vocab);
    se.data.norm = norm_from_meta(loaded.meta);
    pretrained.emplace(std::move(loaded.model));
  } else {
    ModelSpec spec = cfg.model;
    spec.variant = variant;
    spec.vocab = spec.classes = static_cast<int>(vocab.size());
    pretrained.emplace(spec, c.seed);
    const auto h = train_model(*pretrained, se.data, se.splits.train, se.splits.val, cfg.train);
    json meta = checkpoint_meta(*pretrained, se.data, cfg.train, h);
    meta["split"] = split_json(cfg.split);
    save_model(m.output("source_checkpoint.json"), *pretrained, meta);
  }

  // Target inputs use the source normalisation so both models see one feature scale.
  PreparedData td = prepare(tgt, load_features(tgt, a.target.features), vocab, tgt.seasons[tgt.seasons.size() - 2]);
  td.norm = se.data.norm;
  apply_normalization(td.features, td.norm);
  const Splits ts = make_splits(td, cfg.split);
  const LevelSpec spec = level_spec(tgt, cfg);
  std::vector<std::string> classes;
  for (const auto& s : ts.train) classes.push_back(spec.aggregation.group_of(vocab.code(static_cast<std::size_t>(td.label(s.foi, s.season)))));
  const auto truth = codes_of(vocab, sample_labels(td, ts.test));
  const BatchOptions full{kNumWindows, cfg.train.max_history};

  auto os = open_out(m.output("fewshot.csv"));
  os << "n,mode,train_samples,accuracy,aggregated_accuracy,coi_micro_f1\n";
  auto row = [&](const std::string& n, const char* mode, std::size_t samples, const std::vector<int>& pred) {
    const auto r = compute_report(truth, codes_of(vocab, pred), spec);
    os << n << ',' << mode << ',' << samples << ',' << csv::format(r.at(Level::All).accuracy) << ','
       << csv::format(r.at(Level::Aggregated).accuracy) << ',' << csv::format(r.at(Level::InterestOnly).micro_f1) << '\n';
    std::cout << "N=" << n << ' ' << mode << ": accuracy " << r.at(Level::All).accuracy << '\n';
  };
  row("0", "zero-shot", 0, predict_samples(*pretrained, td, ts.test, full));
  for (const auto& r : run_few_shot(*pretrained, td, ts.train, classes, ts.val, ts.test, cfg.fewshot, cfg.train)) {
    row(std::to_string(r.exponent), "pretrained", r.samples, r.pretrained_pred);
    row(std::to_string(r.exponent), "scratch", r.samples, r.scratch_pred);
  }
  os.close();
  m.write();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cropnet: multimodal crop-type classification pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", CROPNET_VERSION);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Run configuration file (key = value)");
    sub->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    sub->add_option("--threads", common.threads, "Worker threads (1 = deterministic)")->capture_default_str()->check(CLI::Range(1u, 256u));
    sub->add_option("--out-dir", common.out_dir, "Output directory (default $CROPNET_OUT/<command>)");
  };

  SynthArgs synth_args;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_common(synth_cmd);
  synth_cmd->add_option("--preset", synth_args.preset, "tiny | nl-analog | fr-analog | late-reveal")->capture_default_str();
  synth_cmd->add_option("--fois", synth_args.fois, "Override the preset's FOI count");

  DataArgs smooth_args;
  auto* smooth_cmd = app.add_subcommand("smooth", "Condition observations into regular series");
  add_common(smooth_cmd);
  smooth_cmd->add_option("--data", smooth_args.data, "Dataset directory")->required();

  DataArgs feat_args;
  auto* feat_cmd = app.add_subcommand("featurize", "Compute season features");
  add_common(feat_cmd);
  feat_cmd->add_option("--data", feat_args.data, "Dataset directory")->required();
  feat_cmd->add_option("--smoothed", feat_args.smoothed, "Smoothed series from 'smooth' (default: condition in place)");

  AggregateArgs agg_args;
  auto* agg_cmd = app.add_subcommand("aggregate", "Build the taxonomy aggregation map");
  add_common(agg_cmd);
  agg_cmd->add_option("--data", agg_args.data, "Dataset directory")->required();
  agg_cmd->add_option("--season", agg_args.season, "Season whose counts drive the merge (default: second to last)");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train one model variant");
  add_common(train_cmd);
  train_cmd->add_option("--data", train_args.data.data, "Dataset directory")->required();
  train_cmd->add_option("--features", train_args.data.features, "features.csv from 'featurize'")->required();
  train_cmd->add_option("--variant", train_args.variant, variant_list())->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval_cmd);
  eval_cmd->add_option("--data", eval_args.data.data, "Dataset directory")->required();
  eval_cmd->add_option("--features", eval_args.data.features, "features.csv from 'featurize'")->required();
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint.json from 'train'")->required();
  eval_cmd->add_option("--level", eval_args.level, "all | aggregated | coi | coi-only | every")->capture_default_str();
  eval_cmd->add_option("--cutoff", eval_args.cutoff, "Early-season cutoffs in windows, e.g. 10-24 or 12,18,24");

  FewShotArgs fs_args;
  auto* fs_cmd = app.add_subcommand("fewshot", "Pretrain on a source dataset and few-shot transfer to a target");
  add_common(fs_cmd);
  fs_cmd->add_option("--source-data", fs_args.source.data, "Source dataset directory")->required();
  fs_cmd->add_option("--source-features", fs_args.source.features, "Source features.csv")->required();
  fs_cmd->add_option("--data", fs_args.target.data, "Target dataset directory")->required();
  fs_cmd->add_option("--features", fs_args.target.features, "Target features.csv")->required();
  fs_cmd->add_option("--variant", fs_args.variant, variant_list())->capture_default_str();
  fs_cmd->add_option("--source-checkpoint", fs_args.source_checkpoint, "Pretrained source checkpoint (skips pretraining)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    load_config(common.config);  // rejected up front, even by commands that use none of its keys
    if (*synth_cmd) cmd_synth(common, synth_args);
    else if (*smooth_cmd) cmd_smooth(common, smooth_args);
    else if (*feat_cmd) cmd_featurize(common, feat_args);
    else if (*agg_cmd) cmd_aggregate(common, agg_args);
    else if (*train_cmd) cmd_train(common, train_args);
    else if (*eval_cmd) cmd_eval(common, eval_args);
    else if (*fs_cmd) cmd_fewshot(common, fs_args);
  } catch (const UnknownVariant& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}

#pragma once

// The eight season-sequence classifiers built on the kernels.
//
//   variant        CR  RS  CD  within-season  between-seasons
//   IntraYE_RS     .   x   .   x              .
//   IntraYE_MM     x   x   .   x              .      (CR as bag of past crops)
//   InterYE_Crop   x   .   .   .              x
//   InterYE_RS     .   x   .   .              x      (raw season vector, no intra encoder)
//   InterYE_MM     x   x   .   .              x
//   HierE_RS       .   x   .   x              x
//   HierE_MM       x   x   .   x              x
//   HierE_final    x   x   x   x              x      (CD fused after the last step)
//
// Crop tokens: 0 means "no previous crop", token k+1 is vocab entry k.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cropnet/csv.hpp"
#include "cropnet/features.hpp"
#include "cropnet/kernels/layers.hpp"
#include "cropnet/kernels/lstm.hpp"

namespace cropnet {

using kernels::Tensor2;

enum class Variant { IntraYE_RS, IntraYE_MM, InterYE_Crop, InterYE_RS, InterYE_MM, HierE_RS, HierE_MM, HierE_final };

inline constexpr std::array<Variant, 8> kAllVariants{Variant::IntraYE_RS, Variant::IntraYE_MM, Variant::InterYE_Crop,
                                                     Variant::InterYE_RS, Variant::InterYE_MM, Variant::HierE_RS,
                                                     Variant::HierE_MM,   Variant::HierE_final};
inline constexpr std::array<std::string_view, 8> kVariantNames{"IntraYE_RS", "IntraYE_MM", "InterYE_Crop", "InterYE_RS",
                                                               "InterYE_MM", "HierE_RS",   "HierE_MM",     "HierE_final"};

inline std::string_view to_string(Variant v) { return kVariantNames[static_cast<std::size_t>(v)]; }

inline std::string variant_list() {
  std::string s;
  for (auto n : kVariantNames) {
    if (!s.empty()) s += ", ";
    s += n;
  }
  return s;
}

class UnknownVariant : public InputError {
 public:
  explicit UnknownVariant(std::string_view name)
      : InputError("unknown variant '" + std::string(name) + "'; valid variants: " + variant_list()) {}
};

inline Variant parse_variant(std::string_view name) {
  for (std::size_t i = 0; i < kVariantNames.size(); ++i)
    if (kVariantNames[i] == name) return kAllVariants[i];
  throw UnknownVariant(name);
}

struct Modalities {
  bool crop_rotation = false;
  bool remote_sensing = false;
  bool crop_distribution = false;
};

inline Modalities modalities(Variant v) {
  switch (v) {
    case Variant::IntraYE_RS: return {false, true, false};
    case Variant::IntraYE_MM: return {true, true, false};
    case Variant::InterYE_Crop: return {true, false, false};
    case Variant::InterYE_RS: return {false, true, false};
    case Variant::InterYE_MM: return {true, true, false};
    case Variant::HierE_RS: return {false, true, false};
    case Variant::HierE_MM: return {true, true, false};
    case Variant::HierE_final: return {true, true, true};
  }
  return {};
}

inline bool is_intra_only(Variant v) { return v == Variant::IntraYE_RS || v == Variant::IntraYE_MM; }
inline bool is_hierarchical(Variant v) {
  return v == Variant::HierE_RS || v == Variant::HierE_MM || v == Variant::HierE_final;
}
inline bool uses_season_encoder(Variant v) { return is_intra_only(v) || is_hierarchical(v); }

// ---------------------------------------------------------------------------

struct ModelSpec {
  Variant variant = Variant::HierE_final;
  int vocab = 0;    // V, number of crop codes
  int classes = 0;  // output classes
  int embed_dim = 64;
  int rnn_dim = 256;
  int rs_proj_dim = 128;
  int stacked = 3;
  int intra_dim = 128;  // per direction; the pooled season vector is twice this
  int att_dim = 64;
  int variables = static_cast<int>(kNumVariables);

  int window_width() const { return variables * static_cast<int>(kNumFunctionals); }
  int rs_features() const { return variables * static_cast<int>(kNumWindows * kNumFunctionals); }

  void validate() const {
    if (vocab < 1) throw InputError("model spec: vocab must be positive");
    if (classes < 1) throw InputError("model spec: classes must be positive");
    if (embed_dim < 1 || rnn_dim < 1 || rs_proj_dim < 1 || stacked < 1 || intra_dim < 1 || att_dim < 1 || variables < 1)
      throw InputError("model spec: every dimension must be positive");
  }

  std::map<std::string, std::string> to_kv() const {
    return {{"variant", std::string(to_string(variant))},
            {"vocab", std::to_string(vocab)},
            {"classes", std::to_string(classes)},
            {"embed_dim", std::to_string(embed_dim)},
            {"rnn_dim", std::to_string(rnn_dim)},
            {"rs_proj_dim", std::to_string(rs_proj_dim)},
            {"stacked", std::to_string(stacked)},
            {"intra_dim", std::to_string(intra_dim)},
            {"att_dim", std::to_string(att_dim)},
            {"variables", std::to_string(variables)}};
  }

  // Unknown keys are rejected; absent keys keep their defaults.
  static ModelSpec from_kv(const std::map<std::string, std::string>& kv) {
    ModelSpec s;
    for (const auto& [k, v] : kv) {
      auto num = [&] {
        try {
          return std::stoi(v);
        } catch (const std::exception&) {
          throw InputError("model spec: " + k + " = '" + v + "' is not an integer");
        }
      };
      if (k == "variant") s.variant = parse_variant(v);
      else if (k == "vocab") s.vocab = num();
      else if (k == "classes") s.classes = num();
      else if (k == "embed_dim") s.embed_dim = num();
      else if (k == "rnn_dim") s.rnn_dim = num();
      else if (k == "rs_proj_dim") s.rs_proj_dim = num();
      else if (k == "stacked") s.stacked = num();
      else if (k == "intra_dim") s.intra_dim = num();
      else if (k == "att_dim") s.att_dim = num();
      else if (k == "variables") s.variables = num();
      else throw InputError("model spec: unknown key " + k);
    }
    return s;
  }

  // "key = value" lines, '#' comments.
  std::string to_config() const {
    std::ostringstream os;
    for (const auto& [k, v] : to_kv()) os << k << " = " << v << '\n';
    return os.str();
  }

  static ModelSpec from_config(std::string_view text) {
    std::map<std::string, std::string> kv;
    std::istringstream is{std::string(text)};
    std::string line;
    while (std::getline(is, line)) {
      const auto body = csv::trim(std::string_view(line).substr(0, line.find('#')));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) throw InputError("model spec: expected key = value, got '" + std::string(body) + "'");
      kv[std::string(csv::trim(body.substr(0, eq)))] = std::string(csv::trim(body.substr(eq + 1)));
    }
    return from_kv(kv);
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : to_kv()) j[k] = v;
    return j;
  }

  static ModelSpec from_json(const nlohmann::json& j) {
    std::map<std::string, std::string> kv;
    for (const auto& [k, v] : j.items()) kv[k] = v.get<std::string>();
    return from_kv(kv);
  }
};

// ---------------------------------------------------------------------------
// A batch of equal-length season sequences. The last season is the one being
// classified; prev_tokens[t] carries the crop of season t-1 (never the target).

struct Batch {
  std::vector<std::vector<int>> prev_tokens;  // [season][row]; empty when CR is absent
  std::vector<Tensor2> rs;                    // [season] rows x rs_features; empty when RS is absent
  Tensor2 distribution;                       // rows x V; empty when CD is absent
  std::vector<int> targets;                   // class per row
  std::size_t windows = kNumWindows;          // RS windows visible per season

  std::size_t rows() const { return targets.size(); }
  std::size_t seasons() const { return !rs.empty() ? rs.size() : prev_tokens.size(); }
  bool has_cr() const { return !prev_tokens.empty(); }
  bool has_rs() const { return !rs.empty(); }
  bool has_cd() const { return distribution.size() > 0; }
};

// Sum of one-hots of every past crop token (token 0 ignored).
inline Tensor2 bag_of_crops(const std::vector<std::vector<int>>& prev_tokens, std::size_t rows, int vocab) {
  Tensor2 out = Tensor2::Zero(static_cast<Eigen::Index>(rows), vocab);
  for (const auto& season : prev_tokens)
    for (std::size_t r = 0; r < rows; ++r)
      if (season[r] > 0) out(static_cast<Eigen::Index>(r), season[r] - 1) += 1.0;
  return out;
}

// Season feature vectors laid out [variable][window][functional] become a
// sequence of per-window inputs laid out [variable][functional].
inline std::vector<Tensor2> window_sequence(const Tensor2& rs, int variables, std::size_t windows) {
  const auto f = static_cast<Eigen::Index>(kNumFunctionals);
  const auto nw = static_cast<Eigen::Index>(kNumWindows);
  std::vector<Tensor2> xs(windows, Tensor2(rs.rows(), variables * f));
  for (std::size_t w = 0; w < windows; ++w)
    for (Eigen::Index v = 0; v < variables; ++v)
      xs[w].middleCols(v * f, f) = rs.middleCols((v * nw + static_cast<Eigen::Index>(w)) * f, f);
  return xs;
}

// Zeroes every feature of windows >= `windows` (early-season view of a flat vector).
inline Tensor2 crop_flat(const Tensor2& rs, int variables, std::size_t windows) {
  if (windows >= kNumWindows) return rs;
  Tensor2 out = rs;
  const auto f = static_cast<Eigen::Index>(kNumFunctionals);
  const auto nw = static_cast<Eigen::Index>(kNumWindows);
  const auto keep = static_cast<Eigen::Index>(windows);
  for (Eigen::Index v = 0; v < variables; ++v) out.middleCols((v * nw + keep) * f, (nw - keep) * f).setZero();
  return out;
}

// ---------------------------------------------------------------------------

class Model {
 public:
  struct Trace {
    std::size_t rows = 0, seasons = 0;
    kernels::BiLstmAttention::Trace intra;
    Tensor2 rs_in, rs_proj;  // stacked season-major: season t occupies rows [t*B, (t+1)*B)
    std::vector<Eigen::Index> encoded_row;  // stacked row -> row of the season encoder's output
    std::vector<Tensor2> step_inputs;
    kernels::StackedLstm::Trace inter;
    Tensor2 season_feat, season_hidden;  // within-season-only head
    Tensor2 fuse_in, fuse1, fuse2;
    Tensor2 final_state;
  };

  Model(ModelSpec spec, std::uint64_t seed) : spec_(spec) {
    spec_.validate();
    build();
    Rng rng = Rng(seed).stream(streams::kInit);
    init(rng);
  }

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelSpec& spec() const { return spec_; }
  kernels::ParamStore& params() { return store_; }
  const kernels::ParamStore& params() const { return store_; }

  void check_modalities(const Batch& b) const {
    const auto m = modalities(spec_.variant);
    auto fail = [&](const char* what) {
      throw ModalityError(std::string(to_string(spec_.variant)) + " requires the " + what + " modality, which is absent");
    };
    if (m.crop_rotation && !b.has_cr()) fail("crop rotation (CR)");
    if (m.remote_sensing && !b.has_rs()) fail("remote sensing (RS)");
    if (m.crop_distribution && !b.has_cd()) fail("crop distribution (CD)");
    if (b.rows() == 0) throw InputError("empty batch");
    if (b.seasons() == 0) throw InputError("batch has no seasons");
    if (b.has_cr() && b.has_rs() && b.prev_tokens.size() != b.rs.size())
      throw ShapeError("batch: CR and RS season counts differ");
    if (b.windows < 1 || b.windows > kNumWindows) throw InputError("batch: visible windows must be in 1..24");
    const auto rows = static_cast<Eigen::Index>(b.rows());
    if (m.remote_sensing)
      for (const auto& x : b.rs) kernels::require_shape(x, rows, spec_.rs_features(), "batch RS season block");
    if (m.crop_rotation)
      for (const auto& s : b.prev_tokens)
        if (static_cast<Eigen::Index>(s.size()) != rows) throw ShapeError("batch: crop token row count");
    if (m.crop_distribution) kernels::require_shape(b.distribution, rows, spec_.vocab, "batch CD block");
  }

  Tensor2 forward(const Batch& b, Trace& tr) const {
    check_modalities(b);
    const Variant v = spec_.variant;
    const auto m = modalities(v);
    const std::size_t B = b.rows();
    const std::size_t T = b.seasons();
    tr = Trace{};
    tr.rows = B;
    tr.seasons = T;

    // Season-level RS vectors, all seasons stacked along rows.
    if (m.remote_sensing) {
      const std::size_t first = is_intra_only(v) ? T - 1 : 0;
      const std::size_t n = T - first;
      Tensor2 stacked(static_cast<Eigen::Index>(n * B), spec_.rs_features());
      for (std::size_t t = first; t < T; ++t)
        stacked.middleRows(static_cast<Eigen::Index>((t - first) * B), static_cast<Eigen::Index>(B)) = b.rs[t];
      if (uses_season_encoder(v)) {
        // Missing seasons are all-zero rows sharing one encoding, so only one
        // of them goes through the encoder.
        const auto rows = stacked.rows();
        tr.encoded_row.assign(static_cast<std::size_t>(rows), 0);
        std::vector<Eigen::Index> keep;
        Eigen::Index zero_slot = -1;
        for (Eigen::Index r = 0; r < rows; ++r) {
          auto& slot = tr.encoded_row[static_cast<std::size_t>(r)];
          if (stacked.row(r).isZero(0.0)) {
            if (zero_slot < 0) {
              zero_slot = static_cast<Eigen::Index>(keep.size());
              keep.push_back(r);
            }
            slot = zero_slot;
          } else {
            slot = static_cast<Eigen::Index>(keep.size());
            keep.push_back(r);
          }
        }
        Tensor2 distinct(static_cast<Eigen::Index>(keep.size()), stacked.cols());
        for (std::size_t i = 0; i < keep.size(); ++i) distinct.row(static_cast<Eigen::Index>(i)) = stacked.row(keep[i]);
        const Tensor2 encoded = intra_.forward(window_sequence(distinct, spec_.variables, b.windows), tr.intra);
        tr.rs_in.resize(rows, encoded.cols());
        for (Eigen::Index r = 0; r < rows; ++r) tr.rs_in.row(r) = encoded.row(tr.encoded_row[static_cast<std::size_t>(r)]);
      } else {
        tr.rs_in = crop_flat(stacked, spec_.variables, b.windows);
      }
      tr.rs_proj = kernels::tanh(rs_proj_.forward(tr.rs_in));
    }

    if (is_intra_only(v)) {
      if (v == Variant::IntraYE_MM)
        tr.season_feat = kernels::concat(tr.rs_proj, bag_of_crops(b.prev_tokens, B, spec_.vocab));
      else
        tr.season_feat = tr.rs_proj;
      tr.season_hidden = kernels::tanh(season_fc_.forward(tr.season_feat));
      tr.final_state = tr.season_hidden;
      return head_.forward(tr.final_state);
    }

    tr.step_inputs.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<const Tensor2*> parts;
      Tensor2 emb, proj;
      if (m.crop_rotation) {
        emb = embedding_.forward(b.prev_tokens[t]);
        parts.push_back(&emb);
      }
      if (m.remote_sensing) {
        proj = tr.rs_proj.middleRows(static_cast<Eigen::Index>(t * B), static_cast<Eigen::Index>(B));
        parts.push_back(&proj);
      }
      tr.step_inputs[t] = kernels::concat(parts);
    }
    const auto hs = inter_.forward(tr.step_inputs, tr.inter);

    if (m.crop_distribution) {
      tr.fuse_in = kernels::concat(hs.back(), b.distribution);
      tr.fuse1 = kernels::relu(fuse1_.forward(tr.fuse_in));
      tr.fuse2 = kernels::relu(fuse2_.forward(tr.fuse1));
      tr.final_state = tr.fuse2;
    } else {
      tr.final_state = hs.back();
    }
    return head_.forward(tr.final_state);
  }

  Tensor2 forward(const Batch& b) const {
    Trace tr;
    return forward(b, tr);
  }

  // Accumulates parameter gradients for d loss / d logits.
  void backward(const Batch& b, const Trace& tr, const Tensor2& dlogits) {
    const Variant v = spec_.variant;
    const auto m = modalities(v);
    const std::size_t B = tr.rows;
    const std::size_t T = tr.seasons;
    const Tensor2 dfinal = head_.backward(tr.final_state, dlogits);

    Tensor2 dproj;
    if (is_intra_only(v)) {
      const Tensor2 dfeat = season_fc_.backward(tr.season_feat, kernels::tanh_backward(tr.season_hidden, dfinal));
      dproj = dfeat.leftCols(spec_.rs_proj_dim);
    } else {
      Tensor2 dh;
      if (m.crop_distribution) {
        const Tensor2 d1 = fuse2_.backward(tr.fuse1, kernels::relu_backward(tr.fuse2, dfinal));
        const Tensor2 din = fuse1_.backward(tr.fuse_in, kernels::relu_backward(tr.fuse1, d1));
        dh = din.leftCols(spec_.rnn_dim);
      } else {
        dh = dfinal;
      }
      std::vector<Tensor2> dhs(T);
      dhs.back() = dh;
      const auto dinputs = inter_.backward(tr.inter, dhs);
      if (m.remote_sensing) dproj = Tensor2::Zero(static_cast<Eigen::Index>(T * B), spec_.rs_proj_dim);
      for (std::size_t t = 0; t < T; ++t) {
        Eigen::Index c = 0;
        if (m.crop_rotation) {
          embedding_.backward(b.prev_tokens[t], dinputs[t].leftCols(spec_.embed_dim));
          c = spec_.embed_dim;
        }
        if (m.remote_sensing)
          dproj.middleRows(static_cast<Eigen::Index>(t * B), static_cast<Eigen::Index>(B)) =
              dinputs[t].middleCols(c, spec_.rs_proj_dim);
      }
    }

    if (m.remote_sensing) {
      const Tensor2 drs = rs_proj_.backward(tr.rs_in, kernels::tanh_backward(tr.rs_proj, dproj));
      if (uses_season_encoder(v)) {
        Tensor2 ddistinct = Tensor2::Zero(static_cast<Eigen::Index>(tr.intra.states.front().rows()), drs.cols());
        for (Eigen::Index r = 0; r < drs.rows(); ++r) ddistinct.row(tr.encoded_row[static_cast<std::size_t>(r)]) += drs.row(r);
        intra_.backward(tr.intra, ddistinct);
      }
    }
  }

  std::vector<int> predict(const Batch& b) const { return kernels::argmax_rows(forward(b)); }

 private:
  void build() {
    const Variant v = spec_.variant;
    const auto m = modalities(v);
    auto& s = store_;
    if (uses_season_encoder(v))
      intra_ = kernels::BiLstmAttention::create(s, "intra", spec_.window_width(), spec_.intra_dim, spec_.att_dim);
    if (m.remote_sensing)
      rs_proj_ = kernels::Linear::create(s, "rs_proj", uses_season_encoder(v) ? 2 * spec_.intra_dim : spec_.rs_features(),
                                         spec_.rs_proj_dim);
    if (is_intra_only(v)) {
      const int in = spec_.rs_proj_dim + (v == Variant::IntraYE_MM ? spec_.vocab : 0);
      season_fc_ = kernels::Linear::create(s, "season_fc", in, spec_.rnn_dim);
    } else {
      if (m.crop_rotation) embedding_ = kernels::Embedding::create(s, "crop_embedding", spec_.vocab + 1, spec_.embed_dim);
      const int in = (m.crop_rotation ? spec_.embed_dim : 0) + (m.remote_sensing ? spec_.rs_proj_dim : 0);
      inter_ = kernels::StackedLstm::create(s, "inter", in, spec_.rnn_dim, static_cast<std::size_t>(spec_.stacked));
      if (m.crop_distribution) {
        fuse1_ = kernels::Linear::create(s, "fuse_cd1", spec_.rnn_dim + spec_.vocab, spec_.rnn_dim);
        fuse2_ = kernels::Linear::create(s, "fuse_cd2", spec_.rnn_dim, spec_.rnn_dim);
      }
    }
    head_ = kernels::Linear::create(s, "head", spec_.rnn_dim, spec_.classes);
  }

  void init(Rng& rng) {
    const Variant v = spec_.variant;
    const auto m = modalities(v);
    if (uses_season_encoder(v)) intra_.init(rng);
    if (m.remote_sensing) rs_proj_.init(rng);
    if (is_intra_only(v)) {
      season_fc_.init(rng);
    } else {
      if (m.crop_rotation) embedding_.init(rng);
      inter_.init(rng);
      if (m.crop_distribution) {
        fuse1_.init(rng);
        fuse2_.init(rng);
      }
    }
    head_.init(rng);
  }

  ModelSpec spec_;
  kernels::ParamStore store_;
  kernels::BiLstmAttention intra_;
  kernels::Linear rs_proj_;
  kernels::Linear season_fc_;
  kernels::Embedding embedding_;
  kernels::StackedLstm inter_;
  kernels::Linear fuse1_, fuse2_;
  kernels::Linear head_;
};

// Token for a crop code under a vocab; unknown codes map to 0.
inline int crop_token(const CropVocab& vocab, const std::string& code) {
  const auto idx = vocab.find(code);
  return idx ? static_cast<int>(*idx) + 1 : 0;
}

}  // namespace cropnet

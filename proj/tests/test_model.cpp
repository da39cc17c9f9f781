#include <gtest/gtest.h>

#include <string>

#include "cropnet/model.hpp"
#include "gradcheck.hpp"

using namespace cropnet;

TEST(Variants, ModalityMatrix) {
  struct Row {
    Variant v;
    bool cr, rs, cd;
  };
  const Row rows[] = {{Variant::IntraYE_RS, false, true, false},  {Variant::IntraYE_MM, true, true, false},
                      {Variant::InterYE_Crop, true, false, false}, {Variant::InterYE_RS, false, true, false},
                      {Variant::InterYE_MM, true, true, false},   {Variant::HierE_RS, false, true, false},
                      {Variant::HierE_MM, true, true, false},     {Variant::HierE_final, true, true, true}};
  for (const auto& r : rows) {
    const auto m = modalities(r.v);
    EXPECT_EQ(m.crop_rotation, r.cr) << to_string(r.v);
    EXPECT_EQ(m.remote_sensing, r.rs) << to_string(r.v);
    EXPECT_EQ(m.crop_distribution, r.cd) << to_string(r.v);
  }
}

TEST(Variants, NamesRoundTripAndUnknownNamesListTheValidOnes) {
  for (Variant v : kAllVariants) EXPECT_EQ(parse_variant(to_string(v)), v);
  try {
    parse_variant("HierE_max");
    FAIL();
  } catch (const UnknownVariant& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("HierE_max"), std::string::npos);
    for (auto n : kVariantNames) EXPECT_NE(msg.find(std::string(n)), std::string::npos);
  }
}

TEST(ModelGradients, EveryVariantOnTwentySeeds) {
  for (Variant v : kAllVariants)
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto r = gradcheck::model_variant(v, seed);
      EXPECT_TRUE(r.ok()) << to_string(v) << " seed " << seed << ": " << r.max_rel << " at " << r.worst;
    }
}

TEST(Model, MissingModalityIsAnError) {
  Model m(gradcheck::small_spec(Variant::HierE_final), 1);
  Rng rng(3);
  Batch b = gradcheck::random_batch(gradcheck::small_spec(Variant::HierE_MM), 2, 2, 24, rng);
  EXPECT_THROW(m.forward(b), ModalityError);
  Model crop_only(gradcheck::small_spec(Variant::InterYE_Crop), 1);
  Batch rs_only = gradcheck::random_batch(gradcheck::small_spec(Variant::HierE_RS), 2, 2, 24, rng);
  EXPECT_THROW(crop_only.forward(rs_only), ModalityError);
}

TEST(Model, WrongInputWidthIsAShapeError) {
  Model m(gradcheck::small_spec(Variant::InterYE_RS), 1);
  Rng rng(3);
  Batch b = gradcheck::random_batch(m.spec(), 2, 2, 24, rng);
  b.rs[0] = Tensor2::Zero(2, 10);
  EXPECT_THROW(m.forward(b), ShapeError);
}

TEST(Model, SameSeedSameParameters) {
  Model a(gradcheck::small_spec(Variant::HierE_final), 5), b(gradcheck::small_spec(Variant::HierE_final), 5),
      c(gradcheck::small_spec(Variant::HierE_final), 6);
  bool differs = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_TRUE(a.params()[i].value == b.params()[i].value);
    differs = differs || a.params()[i].value != c.params()[i].value;
  }
  EXPECT_TRUE(differs);
}

// With t visible windows, features of later windows cannot reach the output.
TEST(Model, LaterWindowsAreInvisibleAtAnEarlyCutoff) {
  for (Variant v : kAllVariants) {
    if (!modalities(v).remote_sensing) continue;
    Model m(gradcheck::small_spec(v), 2);
    Rng rng(11);
    const std::size_t t = 7;
    Batch b = gradcheck::random_batch(m.spec(), 3, 2, t, rng);
    const Tensor2 before = m.forward(b);
    for (auto& x : b.rs)
      for (int var = 0; var < m.spec().variables; ++var)
        for (std::size_t w = t; w < kNumWindows; ++w)
          for (std::size_t f = 0; f < kNumFunctionals; ++f)
            x.col(static_cast<Eigen::Index>(feature_index(static_cast<std::size_t>(var), w, f))).setConstant(42.0);
    const Tensor2 after = m.forward(b);
    EXPECT_TRUE(before == after) << to_string(v);
    b.rs.back()(0, static_cast<Eigen::Index>(feature_index(0, 0, 0))) += 1.0;
    EXPECT_FALSE(m.forward(b) == after) << to_string(v);
  }
}

// Rows of a batch are classified independently.
TEST(Model, RowsDoNotInteract) {
  for (Variant v : kAllVariants) {
    Model m(gradcheck::small_spec(v), 3);
    Rng rng(17);
    Batch b = gradcheck::random_batch(m.spec(), 4, 3, 24, rng);
    const Tensor2 full = m.forward(b);
    Batch one = b;
    one.targets = {b.targets[2]};
    for (auto& s : one.prev_tokens) s = {s[2]};
    for (auto& x : one.rs) x = Tensor2(x.row(2));
    if (b.has_cd()) one.distribution = Tensor2(b.distribution.row(2));
    const Tensor2 single = m.forward(one);
    EXPECT_LT((single.row(0) - full.row(2)).cwiseAbs().maxCoeff(), 1e-12) << to_string(v);
  }
}

// HierE_MM with an all-zero crop embedding computes exactly what HierE_RS
// computes when the RS-side weights are shared.
TEST(Model, ZeroCropEmbeddingReducesMultimodalToRemoteSensingOnly) {
  const auto mm_spec = gradcheck::small_spec(Variant::HierE_MM);
  const auto rs_spec = gradcheck::small_spec(Variant::HierE_RS);
  Model mm(mm_spec, 1), rs(rs_spec, 2);
  auto& dst = mm.params();
  for (std::size_t i = 0; i < rs.params().size(); ++i) {
    const auto& p = rs.params()[i];
    auto* q = dst.find(p.name);
    ASSERT_NE(q, nullptr) << p.name;
    if (p.name == "inter.l0.w_input") q->value.rightCols(p.value.cols()) = p.value;
    else q->value = p.value;
  }
  dst.find("crop_embedding.table")->value.setZero();
  Rng rng(8);
  const Batch b = gradcheck::random_batch(mm_spec, 5, 3, 24, rng);
  const Tensor2 a = mm.forward(b);
  const Tensor2 c = rs.forward(b);
  EXPECT_LT((a - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ModelSpec, KeyValueAndJsonRoundTrip) {
  ModelSpec s = gradcheck::small_spec(Variant::InterYE_MM);
  s.vocab = 141;
  s.classes = 141;
  EXPECT_EQ(ModelSpec::from_kv(s.to_kv()).to_kv(), s.to_kv());
  EXPECT_EQ(ModelSpec::from_json(s.to_json()).to_kv(), s.to_kv());
  EXPECT_EQ(ModelSpec::from_config(s.to_config()).to_kv(), s.to_kv());
  EXPECT_THROW(ModelSpec::from_config("variant = Nope\nvocab = 3\nclasses = 3\n"), UnknownVariant);
}

TEST(ModelSpec, NonPositiveDimensionsAreRejected) {
  ModelSpec s = gradcheck::small_spec(Variant::HierE_final);
  s.rnn_dim = 0;
  EXPECT_THROW(Model(s, 1), InputError);
  s = gradcheck::small_spec(Variant::HierE_final);
  s.vocab = 0;
  EXPECT_THROW(Model(s, 1), InputError);
}

TEST(Model, BagOfCropsIgnoresTheNoCropToken) {
  const std::vector<std::vector<int>> tokens{{0, 2}, {3, 2}};
  const Tensor2 bag = bag_of_crops(tokens, 2, 4);
  EXPECT_EQ(bag(0, 2), 1.0);
  EXPECT_EQ(bag(1, 1), 2.0);
  EXPECT_EQ(bag.sum(), 3.0);
}

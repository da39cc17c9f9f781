#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cropnet/kernels/adam.hpp"
#include "cropnet/kernels/checkpoint.hpp"
#include "gradcheck.hpp"

namespace k = cropnet::kernels;
using cropnet::Rng;
using k::Tensor2;

TEST(KernelGradients, EveryLayerOnTwentySeeds) {
  for (const auto& c : gradcheck::layer_cases())
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto r = c.fn(seed);
      EXPECT_TRUE(r.ok()) << c.name << " seed " << seed << ": " << r.max_rel << " at " << r.worst;
    }
}

TEST(Layers, LinearMatchesHandComputation) {
  k::ParamStore store;
  auto lin = k::Linear::create(store, "l", 2, 1);
  lin.weight->value << 2.0, -1.0;
  lin.bias->value << 0.5;
  Tensor2 x(2, 2);
  x << 1, 1, 3, 4;
  const Tensor2 y = lin.forward(x);
  EXPECT_DOUBLE_EQ(y(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(y(1, 0), 2.5);
  EXPECT_THROW(lin.forward(Tensor2::Zero(1, 3)), cropnet::ShapeError);
}

TEST(Layers, SoftmaxRowsSumToOneAndSurviveLargeLogits) {
  Tensor2 x(2, 3);
  x << 1000, 1001, 999, -5, 0, 5;
  const Tensor2 p = k::softmax(x);
  for (Eigen::Index r = 0; r < 2; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-15);
  EXPECT_TRUE(p.allFinite());
  const auto ce = k::cross_entropy(x, std::vector<int>{1, 2});
  EXPECT_TRUE(std::isfinite(ce.loss));
}

TEST(Layers, CrossEntropyOfUniformLogitsIsLogClasses) {
  const Tensor2 x = Tensor2::Zero(3, 4);
  EXPECT_NEAR(k::cross_entropy(x, std::vector<int>{0, 1, 3}).loss, std::log(4.0), 1e-15);
  EXPECT_THROW(k::cross_entropy(x, std::vector<int>{0, 1, 4}), cropnet::ShapeError);
}

TEST(Layers, EmbeddingRejectsOutOfRangeTokens) {
  k::ParamStore store;
  auto emb = k::Embedding::create(store, "e", 3, 2);
  EXPECT_THROW(emb.forward(std::vector<int>{3}), cropnet::ShapeError);
  EXPECT_THROW(emb.forward(std::vector<int>{-1}), cropnet::ShapeError);
}

TEST(Lstm, ForgetBiasStartsAtOne) {
  k::ParamStore store;
  auto cell = k::LstmCell::create(store, "c", 2, 3);
  Rng rng(4);
  cell.init(rng);
  for (Eigen::Index j = 3; j < 6; ++j) EXPECT_EQ(cell.bias->value(0, j), 1.0);
}

TEST(Lstm, NonFiniteInputIsReported) {
  k::ParamStore store;
  auto cell = k::LstmCell::create(store, "c", 2, 2);
  Tensor2 x = Tensor2::Zero(1, 2);
  x(0, 1) = std::nan("");
  k::LstmCell::Cache cache;
  EXPECT_THROW(cell.forward(x, Tensor2::Zero(1, 2), Tensor2::Zero(1, 2), cache), cropnet::NumericError);
}

TEST(Lstm, AttentionWeightsFormADistribution) {
  k::ParamStore store;
  auto enc = k::BiLstmAttention::create(store, "a", 3, 2, 4);
  Rng rng(2);
  enc.init(rng);
  std::vector<Tensor2> xs;
  for (int t = 0; t < 5; ++t) xs.push_back(gradcheck::random_tensor(4, 3, rng));
  k::BiLstmAttention::Trace tr;
  const Tensor2 pooled = enc.forward(xs, tr);
  EXPECT_EQ(pooled.rows(), 4);
  EXPECT_EQ(pooled.cols(), 4);
  for (Eigen::Index r = 0; r < 4; ++r) {
    EXPECT_NEAR(tr.weights.row(r).sum(), 1.0, 1e-12);
    EXPECT_GE(tr.weights.row(r).minCoeff(), 0.0);
  }
}

// Two Adam steps on a scalar parameter, against the update rule written out.
TEST(Adam, MatchesBiasCorrectedUpdate) {
  k::ParamStore store;
  auto* p = store.add("p", 1, 1);
  p->value(0, 0) = 1.0;
  k::AdamConfig cfg;
  cfg.lr = 0.1;
  k::Adam adam(cfg);
  const double g1 = 0.5, g2 = -2.0;
  p->grad(0, 0) = g1;
  adam.step(store);
  double m = 0.1 * g1, v = 0.001 * g1 * g1;
  double expect = 1.0 - 0.1 * (m / (1 - 0.9)) / (std::sqrt(v / (1 - 0.999)) + 1e-8);
  EXPECT_NEAR(p->value(0, 0), expect, 1e-15);
  p->grad(0, 0) = g2;
  adam.step(store);
  m = 0.9 * m + 0.1 * g2;
  v = 0.999 * v + 0.001 * g2 * g2;
  expect -= 0.1 * (m / (1 - 0.81)) / (std::sqrt(v / (1 - 0.999 * 0.999)) + 1e-8);
  EXPECT_NEAR(p->value(0, 0), expect, 1e-15);
  EXPECT_EQ(adam.steps(), 2);
}

TEST(Adam, FirstStepMovesEachCoordinateByAboutTheLearningRate) {
  k::ParamStore store;
  auto* p = store.add("p", 2, 3);
  p->grad << 1, -3, 1e-3, 7, -0.2, 50;
  k::Adam adam;
  adam.step(store);
  for (Eigen::Index i = 0; i < p->value.size(); ++i) EXPECT_NEAR(std::abs(p->value.data()[i]), 1e-3, 2e-8);
}

TEST(Adam, MinimisesAQuadratic) {
  k::ParamStore store;
  auto* p = store.add("p", 1, 2);
  p->value << 3, -2;
  k::AdamConfig cfg;
  cfg.lr = 0.05;
  k::Adam adam(cfg);
  for (int i = 0; i < 2000; ++i) {
    p->grad = 2 * (p->value.array() - 1.0).matrix();
    adam.step(store);
  }
  EXPECT_NEAR(p->value(0, 0), 1.0, 1e-3);
  EXPECT_NEAR(p->value(0, 1), 1.0, 1e-3);
}

TEST(ParamStore, RejectsDuplicateNamesAndRestoresSnapshots) {
  k::ParamStore store;
  auto* a = store.add("a", 2, 2);
  EXPECT_THROW(store.add("a", 1, 1), cropnet::Error);
  a->value.setConstant(3);
  const auto snap = store.snapshot();
  a->value.setZero();
  store.restore(snap);
  EXPECT_EQ(a->value(1, 1), 3);
  EXPECT_EQ(store.total_size(), 4);
}

TEST(Checkpoint, RoundTripIsBitExactAndBytesAreStable) {
  k::ParamStore store;
  auto lin = k::Linear::create(store, "l", 3, 2);
  Rng rng(9);
  lin.init(rng);
  lin.weight->value(0, 0) = 0.1 + 0.2;  // not exactly representable in short decimal
  const auto dir = std::filesystem::temp_directory_path() / "cropnet_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "a.json").string();
  k::save_checkpoint(path, store, {{"note", "x"}});

  k::ParamStore other;
  auto lin2 = k::Linear::create(other, "l", 3, 2);
  k::from_json(k::read_checkpoint(path), other);
  EXPECT_TRUE(lin2.weight->value == lin.weight->value);
  EXPECT_TRUE(lin2.bias->value == lin.bias->value);

  const auto path2 = (dir / "b.json").string();
  k::save_checkpoint(path2, other, {{"note", "x"}});
  std::ifstream f1(path), f2(path2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  EXPECT_EQ(s1.str(), s2.str());
}

TEST(Checkpoint, ShapeAndNameMismatchesAreRejected) {
  k::ParamStore a;
  k::Linear::create(a, "l", 3, 2);
  const auto j = k::to_json(a);
  k::ParamStore wrong_shape;
  k::Linear::create(wrong_shape, "l", 4, 2);
  EXPECT_THROW(k::from_json(j, wrong_shape), cropnet::ShapeError);
  k::ParamStore wrong_name;
  k::Linear::create(wrong_name, "m", 3, 2);
  EXPECT_THROW(k::from_json(j, wrong_name), cropnet::ShapeError);
  auto bad = j;
  bad["format"] = "other";
  EXPECT_THROW(k::from_json(bad, a), cropnet::InputError);
}

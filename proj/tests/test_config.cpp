#include <gtest/gtest.h>

#include "cropnet/config.hpp"

using namespace cropnet;

namespace {

std::size_t error_line(std::string_view text) {
  try {
    parse_run_config(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(RunConfig, EveryKeyIsParsed) {
  const auto c = parse_run_config(
      "# desk run\n"
      "\n"
      "embed_dim = 16\n"
      "rnn_dim = 32   # trailing comment\n"
      "rs_proj_dim = 24\n"
      "stacked = 2\n"
      "intra_dim = 12\n"
      "att_dim = 10\n"
      "batch_size = 64\n"
      "epochs = 25\n"
      "lr = 0.002\n"
      "augment = true\n"
      "min_crop = 12\n"
      "max_crop = 20\n"
      "max_history = 3\n"
      "seed = 99\n"
      "split = spatio-temporal\n"
      "holdout_fraction = 0.2\n"
      "first_target = 2\n"
      "fewshot_exponents = 1, 3,5\n"
      "aggregation_threshold = 0.01\n"
      "coi = a,b\n"
      "grassland = g\n");
  EXPECT_EQ(c.model.embed_dim, 16);
  EXPECT_EQ(c.model.rnn_dim, 32);
  EXPECT_EQ(c.model.rs_proj_dim, 24);
  EXPECT_EQ(c.model.stacked, 2);
  EXPECT_EQ(c.model.intra_dim, 12);
  EXPECT_EQ(c.model.att_dim, 10);
  EXPECT_EQ(c.train.batch_size, 64u);
  EXPECT_EQ(c.train.epochs, 25u);
  EXPECT_EQ(c.train.adam.lr, 0.002);
  EXPECT_TRUE(c.train.augment);
  EXPECT_EQ(c.train.min_crop, 12u);
  EXPECT_EQ(c.train.max_crop, 20u);
  EXPECT_EQ(c.train.max_history, 3u);
  EXPECT_EQ(c.train.seed, 99u);
  EXPECT_EQ(c.split.mode, SplitMode::SpatioTemporal);
  EXPECT_EQ(c.split.holdout_fraction, 0.2);
  EXPECT_EQ(c.split.first_target, 2u);
  EXPECT_EQ(c.fewshot.exponents, (std::vector<int>{1, 3, 5}));
  EXPECT_EQ(c.aggregation_threshold, 0.01);
  EXPECT_TRUE(c.has_interest);
  EXPECT_EQ(c.interest, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(c.grassland, (std::vector<std::string>{"g"}));
}

TEST(RunConfig, EmptyTextGivesDefaults) {
  const auto c = parse_run_config("");
  const RunConfig d;
  EXPECT_EQ(c.canonical(), d.canonical());
  EXPECT_FALSE(c.has_interest);
}

TEST(RunConfig, ErrorsCarryTheLine) {
  EXPECT_EQ(error_line("epochs = 3\nbogus = 1\n"), 2u);
  EXPECT_EQ(error_line("epochs = three\n"), 1u);
  EXPECT_EQ(error_line("\n\nepochs 3\n"), 3u);
  EXPECT_EQ(error_line("lr = 1e-3x\n"), 1u);
  EXPECT_EQ(error_line("augment = maybe\n"), 1u);
  EXPECT_EQ(error_line("embed_dim = 0\n"), 1u);
  EXPECT_EQ(error_line("seed = -4\n"), 1u);
  EXPECT_EQ(error_line("# c\nsplit = random\n"), 2u);
  EXPECT_EQ(error_line("fewshot_exponents = 2,31\n"), 1u);
  EXPECT_EQ(error_line("fewshot_exponents = 2,x\n"), 1u);
}

TEST(RunConfig, SemanticChecksAfterParsing) {
  EXPECT_THROW(parse_run_config("aggregation_threshold = 0\n"), InputError);
  EXPECT_THROW(parse_run_config("aggregation_threshold = 1\n"), InputError);
  EXPECT_THROW(parse_run_config("min_crop = 20\nmax_crop = 10\n"), InputError);
}

TEST(RunConfig, CanonicalDumpIsSortedAndOrderIndependent) {
  const auto a = parse_run_config("epochs = 4\nlr = 0.01\ncoi = x\n");
  const auto b = parse_run_config("coi = x\nlr = 0.01\nepochs = 4\n");
  EXPECT_EQ(a.canonical(), b.canonical());
  EXPECT_NE(a.canonical(), parse_run_config("epochs = 5\n").canonical());
  std::istringstream is(a.canonical());
  std::string line, prev;
  while (std::getline(is, line)) {
    const auto key = line.substr(0, line.find(" = "));
    EXPECT_LT(prev, key);
    prev = key;
  }
}

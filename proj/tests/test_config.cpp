#include <gtest/gtest.h>

#include "broadface/config.hpp"

namespace broadface {
namespace {

TEST(Config, ParsesKeysCommentsAndBlankLines) {
  const auto cfg = parse_config(
      "# desk run\n"
      "num_classes = 20\n"
      "\n"
      "layer_sizes=32,48,8   # trailing comment\n"
      "margin=cosface\nmargin_m=0.3\nmargin_scale=30\n"
      "queue_capacity=0\ncompensation=false\nlr_schedule=constant\n"
      "recall_k=1,5\nfar_targets=0.1,0.001\nseed=42\n");
  EXPECT_EQ(cfg.synthetic.num_classes, 20u);
  EXPECT_EQ(cfg.layer_sizes, (std::vector<std::size_t>{32, 48, 8}));
  EXPECT_EQ(cfg.margin, MarginConfig::cosface(0.3, 30));
  EXPECT_EQ(cfg.queue_capacity, 0u);
  EXPECT_FALSE(cfg.compensation);
  EXPECT_EQ(cfg.schedule, ScheduleKind::kConstant);
  EXPECT_EQ(cfg.recall_k, (std::vector<std::size_t>{1, 5}));
  EXPECT_EQ(cfg.far_targets, (std::vector<double>{0.1, 0.001}));
  EXPECT_EQ(cfg.seed, 42u);
}

TEST(Config, ErrorsCarryLineNumbers) {
  try {
    parse_config("seed=1\nbogus_key=3\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config("seed\n"), ConfigError);
  EXPECT_THROW(parse_config("batch_size=abc\n"), ConfigError);
  EXPECT_THROW(parse_config("compensation=maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("margin=sphereface\n"), ConfigError);
}

TEST(Config, ValidationRejectsInconsistentSettings) {
  for (const char* text : {"layer_sizes=16,8\n",  // input must match feature_dim
                           "batch_size=0\n", "momentum=1\n", "classifier_lr_scale=0\n",
                           "margin=arcface\nmargin_m=2\n", "recall_k=0\n",
                           "sweep_capacities=0,64,64\n", "samples_per_class=4\nholdout_per_class=4\n"}) {
    EXPECT_THROW(parse_config(text).validate(), ConfigError) << text;
  }
  EXPECT_NO_THROW(ExperimentConfig{}.validate());
}

TEST(Config, HashTracksContent) {
  const auto a = parse_config("seed=1\n");
  const auto b = parse_config("# same thing\nseed = 1\n");
  const auto c = parse_config("seed=2\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  // Where results go does not change what is computed.
  EXPECT_EQ(parse_config("seed=1\nout_dir=elsewhere\n").hash(), a.hash());
}

TEST(Config, CanonicalTextRoundTrips) {
  const auto cfg = parse_config("num_classes=20\nmargin=plain\nmargin_scale=12\nlayer_sizes=32,8\nseed=5\n");
  const auto again = parse_config(cfg.canonical_text());
  EXPECT_EQ(again.canonical_text(), cfg.canonical_text());
  EXPECT_EQ(again.hash(), cfg.hash());
}

TEST(Config, ScheduleFollowsRunLength) {
  auto cfg = parse_config("learning_rate=0.1\nlr_schedule=step\n");
  const auto sgd = cfg.sgd_config(800);
  EXPECT_EQ(lr_at(sgd.schedule, 0), 0.1);
  EXPECT_NEAR(lr_at(sgd.schedule, 600), 0.01, 1e-18);
  EXPECT_NEAR(lr_at(sgd.schedule, 799), 0.001, 1e-18);
  cfg = parse_config("learning_rate=0.1\nlr_schedule=constant\n");
  EXPECT_EQ(lr_at(cfg.sgd_config(800).schedule, 799), 0.1);
}

}  // namespace
}  // namespace broadface

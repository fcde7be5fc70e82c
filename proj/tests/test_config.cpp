#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>
#include <unistd.h>

#include "darer/config.hpp"

using namespace darer;
namespace fs = std::filesystem;

TEST(RunConfig, DefaultsFollowVariant) {
  RunConfig a = load_run_config(std::nullopt, {});
  EXPECT_EQ(a.model.variant, Variant::reteformer);
  EXPECT_EQ(a.model.d_hidden, 256u);
  EXPECT_EQ(a.train.lr, 1e-3);
  EXPECT_EQ(a.train.batch, 16u);
  RunConfig b = load_run_config(std::nullopt, {"variant=rgcn"});
  EXPECT_EQ(b.model.d_hidden, 128u);
  EXPECT_EQ(b.model.steps, 3);
  EXPECT_EQ(b.model.gamma_s, 3.0);
}

TEST(RunConfig, OverridesWinAndLabelWidthFollowsHidden) {
  RunConfig c = load_run_config(std::nullopt, {"d_hidden=32", "T=0", "lr=0.01", "epochs=3"});
  EXPECT_EQ(c.model.d_hidden, 32u);
  EXPECT_EQ(c.model.d_label, 32u);
  EXPECT_EQ(c.model.steps, 0);
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.train.epochs, 3u);
}

TEST(RunConfig, UnknownKeyRejectedByName) {
  try {
    load_run_config(std::nullopt, {"dropuot=0.1"});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dropuot"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_run_config(std::nullopt, {"num_acts=4"}), ConfigError);
  EXPECT_THROW(load_run_config(std::nullopt, {"noequals"}), ConfigError);
  EXPECT_THROW(load_run_config(std::nullopt, {"lr=-1"}), ConfigError);
  EXPECT_THROW(load_run_config(std::nullopt, {"batch=0"}), ConfigError);
}

TEST(RunConfig, FileThenOverrides) {
  const fs::path p = fs::temp_directory_path() / ("darer_cfg_" + std::to_string(::getpid()) + ".cfg");
  std::ofstream(p) << "# comment\nvariant = rgcn\n\nd_hidden = 16\nseed = 4  \n";
  RunConfig c = load_run_config(p, {"seed=9"});
  EXPECT_EQ(c.model.variant, Variant::rgcn);
  EXPECT_EQ(c.model.d_hidden, 16u);
  EXPECT_EQ(c.train.seed, 9u);
  std::ofstream(p) << "d_hidden 16\n";
  EXPECT_THROW(load_run_config(p, {}), ConfigError);
  fs::remove(p);
  EXPECT_THROW(load_run_config(p, {}), ConfigError);
}

TEST(RunConfig, KeyValueRoundTrip) {
  RunConfig c = load_run_config(std::nullopt, {"variant=rgcn", "T=1", "ignore_sentiment_label=neutral",
                                               "sentiment_f1=weighted", "stop_at=0.9"});
  std::map<std::string, std::string> kv = c.to_kv();
  for (const auto& k : run_config_keys()) EXPECT_EQ(kv.count(k), 1u) << k;
  RunConfig d = RunConfig::from_kv(kv);
  EXPECT_EQ(d.to_kv(), kv);
}

TEST(RunConfig, MetricConfigResolvesIgnoredLabel) {
  RunConfig c = load_run_config(std::nullopt, {"ignore_sentiment_label=neutral", "act_f1=weighted"});
  MetricConfig m = c.metric_config({"negative", "neutral", "positive"});
  ASSERT_TRUE(m.ignore_sentiment.has_value());
  EXPECT_EQ(*m.ignore_sentiment, 1u);
  EXPECT_EQ(m.act_f1, F1Kind::weighted);
  EXPECT_THROW(c.metric_config({"a", "b"}), ConfigError);
  EXPECT_THROW(parse_f1_kind("micro"), ConfigError);
}

TEST(RunConfig, ParseAssignment) {
  EXPECT_EQ(parse_assignment("a=b=c"), (std::pair<std::string, std::string>{"a", "b=c"}));
  EXPECT_THROW(parse_assignment("=x"), ConfigError);
}

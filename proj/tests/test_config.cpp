// Copyright (c) 2026 The snapmix-cpp Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sstream>

#include "snapmix/config.hpp"

namespace snapmix {
namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

TEST(Config, DefaultsFollowScaledSchedule) {
  const ExperimentConfig c;
  EXPECT_EQ(c.train.epochs, 60);
  EXPECT_EQ(c.train.lr_decay_epochs, (std::vector<int>{24, 48}));
  EXPECT_EQ(c.train.lr_decay_factor, 0.1);
  EXPECT_EQ(c.train.momentum, 0.9);
  EXPECT_EQ(c.train.seeds.size(), 3u);
  EXPECT_EQ(c.train.final_k, 10);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParsesCommentsAndWhitespace) {
  const ExperimentConfig c = parse_config_text(
      "# toy run\n"
      "\n"
      "mix.strategy = snapmix\n"
      "  mix.alpha=5\n"
      "train.seeds = 3, 4 ,5\n"
      "model.mid_branch = true\n"
      "data.noise_std = 0.125\n");
  EXPECT_EQ(c.mix.strategy, MixStrategy::snapmix);
  EXPECT_EQ(c.mix.alpha, 5.0);
  EXPECT_EQ(c.train.seeds, (std::vector<int>{3, 4, 5}));
  EXPECT_TRUE(c.model.mid_branch);
  EXPECT_EQ(c.data.synthetic.noise_std, 0.125);
}

TEST(Config, UnknownKeyIsNamed) {
  const std::string msg = error_of([] { parse_config_text("mix.alpah = 3\n"); });
  EXPECT_NE(msg.find("mix.alpah"), std::string::npos);
  EXPECT_NE(error_of([] {
              ExperimentConfig c;
              apply_override(c, "train.bogus=1");
            }).find("train.bogus"),
            std::string::npos);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config_text("mix.alpha\n"), ConfigError);
  EXPECT_THROW(parse_config_text("mix.alpha = 1\nmix.alpha = 2\n"), ConfigError);
  EXPECT_THROW(parse_config_text("mix.alpha = three\n"), ConfigError);
  EXPECT_THROW(parse_config_text("train.epochs = 1.5\n"), ConfigError);
  EXPECT_THROW(parse_config_text("model.mid_branch = maybe\n"), ConfigError);
  EXPECT_THROW(parse_config_text("mix.strategy = fmix\n"), ConfigError);
  ExperimentConfig c;
  EXPECT_THROW(apply_override(c, "no-equals-sign"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/dir/x.cfg"), ConfigError);
}

TEST(Config, ValidateRejectsBadValues) {
  ExperimentConfig c;
  c.train.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.train.seeds.clear();
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.mix.alpha = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.data.source = DataSource::folder;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ExperimentConfig{};
  c.data.flip = "sometimes";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, OverrideWins) {
  ExperimentConfig c = parse_config_text("mix.strategy = cutmix\n");
  apply_override(c, "mix.strategy=snapmix");
  EXPECT_EQ(get_config_value(c, "mix.strategy"), "snapmix");
  EXPECT_NE(canonical_config(c).find("mix.strategy = snapmix\n"), std::string::npos);
}

TEST(Config, CanonicalRoundTrip) {
  ExperimentConfig c;
  apply_override(c, "data.noise_std=0.1");
  apply_override(c, "train.lr=0.003");
  apply_override(c, "train.weight_decay=1e-5");
  apply_override(c, "mix.switch_prob=0.3333333333333333");
  apply_override(c, "model.channels=4,8");
  apply_override(c, "model.downsample=1,0");
  apply_override(c, "train.lr_decay_epochs=");
  const std::string text = canonical_config(c);
  const ExperimentConfig back = parse_config_text(text);
  EXPECT_EQ(canonical_config(back), text);
  EXPECT_EQ(back.train.lr, 0.003);
  EXPECT_EQ(back.mix.switch_prob, 0.3333333333333333);
  EXPECT_TRUE(back.train.lr_decay_epochs.empty());
  EXPECT_EQ(config_hash(back), config_hash(c));
}

TEST(Config, CanonicalListsEveryKeySorted) {
  const std::string text = canonical_config(ExperimentConfig{});
  std::istringstream in(text);
  std::string line, prev;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const std::string key = line.substr(0, line.find(" = "));
    EXPECT_LT(prev, key);
    prev = key;
    ++n;
  }
  EXPECT_EQ(n, config_keys().size());
}

TEST(Config, HashIsStableAndSensitive) {
  ExperimentConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.mix.alpha = 3.0000000001;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, LearningRateSchedule) {
  TrainConfig t;
  t.lr = 0.1;
  t.lr_decay_epochs = {3, 5};
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 0), 0.1);
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 2), 0.1);
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 3), 0.1 * 0.1);
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 4), 0.1 * 0.1);
  EXPECT_DOUBLE_EQ(lr_at_epoch(t, 5), 0.1 * 0.1 * 0.1);
}

TEST(Config, FlipPolicy) {
  DataConfig d;
  EXPECT_FALSE(d.flip_enabled());
  d.source = DataSource::folder;
  EXPECT_TRUE(d.flip_enabled());
  d.flip = "false";
  EXPECT_FALSE(d.flip_enabled());
}

}  // namespace
}  // namespace snapmix

#include <gtest/gtest.h>

#include <fstream>

#include "mwafm/config.hpp"
#include "mwafm/error.hpp"
#include "temp_dir.hpp"

using namespace mwafm;

TEST(Config, Defaults) {
  const Config c;
  const ModelConfig m = model_config(c);
  EXPECT_EQ(m.d, 512u);
  EXPECT_EQ(m.heads, 4u);
  EXPECT_EQ(m.mwam.windows, (std::vector<std::size_t>{2, 4, 6, 12}));
  EXPECT_TRUE(m.aham.enabled);
  EXPECT_TRUE(m.uses_mwam());
  const TrainConfig t = train_config(c);
  EXPECT_EQ(t.lr, 1e-4);
  EXPECT_EQ(t.batch_size, 64u);
  EXPECT_EQ(t.epochs, 50u);
  EXPECT_EQ(t.beta1, 0.9);
  EXPECT_EQ(t.beta2, 0.999);
  EXPECT_EQ(t.adam_eps, 1e-8);
}

TEST(Config, ParseFileThenOverride) {
  TempDir dir;
  std::ofstream(dir / "a.cfg") << "# comment\nmodel.d = 32  # trailing\n\nmwam.windows = 2, 6\n";
  Config c = Config::load(dir / "a.cfg");
  c.apply("model.d=64");
  const ModelConfig m = model_config(c);
  EXPECT_EQ(m.d, 64u);
  EXPECT_EQ(m.mwam.windows, (std::vector<std::size_t>{2, 6}));
}

TEST(Config, RejectsUnknownAndMalformed) {
  Config c;
  EXPECT_THROW(c.set("model.depth", "3"), ValidationError);
  EXPECT_THROW(c.apply("model.d"), ValidationError);
  EXPECT_THROW(Config::parse("model.d 3"), ValidationError);
  c.set("model.d", "abc");
  EXPECT_THROW(model_config(c), ValidationError);
  c = Config();
  c.set("aham.enabled", "maybe");
  EXPECT_THROW(model_config(c), ValidationError);
  EXPECT_THROW(Config::load("/nonexistent.cfg"), IoError);
}

TEST(Config, ModelValidation) {
  Config c;
  c.set("model.heads", "3");
  EXPECT_THROW(model_config(c).validate(), ValidationError);
  c = Config();
  c.set("mwam.windows", "4,2");
  EXPECT_THROW(model_config(c).validate(), ValidationError);
  c.set("mwam.windows", "12,12,12,12");
  EXPECT_NO_THROW(model_config(c).validate());
  c.set("aham.cross_mode", "mix");
  EXPECT_THROW(model_config(c), ValidationError);
}

TEST(Config, EchoRoundTrip) {
  Config c;
  c.apply("train.lr=0.001");
  c.apply("mwam.enabled=false");
  EXPECT_EQ(Config::parse(c.echo()), c);
  EXPECT_NE(c.echo().find("train.lr = 0.001\n"), std::string::npos);
}

TEST(Config, EveryAblationSwitchRegistered) {
  std::vector<std::string> names;
  for (const auto& k : Config::keys()) names.push_back(k.name);
  for (const char* key : {"aham.enabled", "mwam.enabled", "mwam.windows", "model.mwafm_star_layers",
                          "mwam.share_scale_params", "mwam.audio_once", "aham.cross_mode"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), key), names.end()) << key;
  }
}

TEST(Config, StarLayersDisableMwam) {
  Config c;
  c.set("model.mwafm_star_layers", "2");
  EXPECT_FALSE(model_config(c).uses_mwam());
}

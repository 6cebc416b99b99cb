#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "lgrpool/checkpoint.hpp"
#include "lgrpool/config.hpp"
#include "lgrpool/error.hpp"
#include "test_util.hpp"

using namespace lgrpool;

TEST(Config, DefaultsMatchHyperparameterTable) {
  TrainingConfig cfg;
  EXPECT_EQ(cfg.batch_size, 32u);
  EXPECT_EQ(cfg.num_pooling_layers, 14u);
  EXPECT_EQ(cfg.k, 10u);
  EXPECT_EQ(cfg.alpha, 0.3);
  EXPECT_EQ(cfg.epochs, 100u);
  EXPECT_EQ(cfg.hidden, 200u);
  EXPECT_EQ(cfg.lr, 1e-3);
  EXPECT_EQ(cfg.gamma, 0.2);
  EXPECT_NO_THROW(cfg.validate());
  auto desk = desk_profile();
  EXPECT_EQ(desk.epochs, 20u);
  EXPECT_EQ(desk.em_rounds_max, 5u);
}

TEST(Config, ParseFormatRoundTrip) {
  auto cfg = parse_config(
      "# comment\n"
      "hidden = 64\n"
      "gamma=0.35   # trailing\n"
      "\n"
      "em_tolerance = inf\n"
      "seed = 12\n");
  EXPECT_EQ(cfg.hidden, 64u);
  EXPECT_EQ(cfg.gamma, 0.35);
  EXPECT_TRUE(std::isinf(cfg.em_tolerance));
  EXPECT_EQ(cfg.seed, 12u);
  auto again = parse_config(format_config(cfg));
  EXPECT_EQ(format_config(again), format_config(cfg));
  EXPECT_EQ(config_to_json(config_from_json(config_to_json(cfg))), config_to_json(cfg));
  EXPECT_TRUE(std::isinf(config_from_json(config_to_json(cfg)).em_tolerance));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("nope = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("hidden = many\n"), ConfigError);
  EXPECT_THROW(parse_config("hidden 5\n"), ConfigError);
  EXPECT_THROW(parse_config("alpha = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("gamma = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("split_train = 0.9\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/lgrpool.cfg"), ConfigError);
  try {
    parse_config("hidden = 3\nbogus = 2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  auto ds = test::toy_dataset(10, 1);
  TrainingConfig cfg;
  cfg.hidden = 8;
  cfg.epochs = 1;
  cfg.num_pooling_layers = 3;
  auto state = init_training(ds, cfg);
  expectation_phase(state, ds, {}, cfg, 1);
  maximization_phase(state, ds, {}, cfg, 1);
  Checkpoint ckpt{cfg, state.params, state.propagation_opt, state.pooling_opt};

  test::TempDir dir("ckpt");
  save_checkpoint(dir.path() / "c.json", ckpt);
  auto back = load_checkpoint(dir.path() / "c.json");
  EXPECT_TRUE(back.params.propagation.bitwise_equal(ckpt.params.propagation));
  EXPECT_TRUE(back.params.pooling.bitwise_equal(ckpt.params.pooling));
  EXPECT_TRUE(back.propagation_opt.first_moment.bitwise_equal(ckpt.propagation_opt.first_moment));
  EXPECT_TRUE(back.pooling_opt.second_moment.bitwise_equal(ckpt.pooling_opt.second_moment));
  EXPECT_EQ(back.pooling_opt.step, ckpt.pooling_opt.step);
  EXPECT_EQ(format_config(back.config), format_config(cfg));
}

TEST(Checkpoint, RejectsOtherVersionsAndGarbage) {
  TrainingConfig cfg;
  cfg.hidden = 4;
  cfg.num_pooling_layers = 1;
  Checkpoint ckpt{cfg, init_model({2, 4, 2, 1}, 0), {}, {}};
  ckpt.propagation_opt = AdamState::for_params(ckpt.params.propagation);
  ckpt.pooling_opt = AdamState::for_params(ckpt.params.pooling);
  auto j = checkpoint_to_json(ckpt);
  EXPECT_EQ(j["format_version"], kCheckpointFormatVersion);
  j["format_version"] = kCheckpointFormatVersion + 1;
  EXPECT_THROW(checkpoint_from_json(j), ParseError);

  test::TempDir dir("ckpt-bad");
  std::ofstream(dir.path() / "bad.json") << "{not json";
  EXPECT_THROW(load_checkpoint(dir.path() / "bad.json"), ParseError);
}

#include "doctest.h"

#include "knitwork/config.hpp"
#include "knitwork/errors.hpp"
#include "tiny.hpp"

using namespace knitwork;

TEST_CASE("config text round-trips through the parser") {
  TrainConfig c = testing::tiny_config();
  c.weights.gamma = 0.123456789012345;
  c.spec.scale_weights = {1.0, 0.5, 0.25};
  c.gan_form = GanForm::kMinimax;
  TrainConfig back;
  apply_settings(back, parse_settings(config_text(c)));
  CHECK(config_text(back) == config_text(c));
  CHECK(back.weights.gamma == c.weights.gamma);
  CHECK(back.gan_form == GanForm::kMinimax);
}

TEST_CASE("settings parser") {
  const Settings s = parse_settings("# comment\n\n  alpha = 2.5  \nxpatch=off # trailing\n");
  CHECK(s.at("alpha") == "2.5");
  CHECK(s.at("xpatch") == "off");
  CHECK_THROWS_AS(parse_settings("alpha 2"), ConfigError);
  TrainConfig c;
  CHECK_THROWS_AS(apply_settings(c, {{"no-such-key", "1"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(c, {{"alpha", "abc"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(c, {{"iters", "-3"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(c, {{"xpatch", "maybe"}}), ConfigError);
  CHECK_THROWS_AS(apply_settings(c, {{"gan-form", "wgan"}}), ConfigError);
}

TEST_CASE("scales reset per-scale settings unless given") {
  TrainConfig c;
  apply_settings(c, {{"scales", "1,2"}});
  CHECK(c.spec.scales == std::vector<std::size_t>{1, 2});
  CHECK(c.spec.blur_sigma == std::vector<double>{0.0, 1.0});
  CHECK(c.spec.scale_weights == std::vector<double>{1.0, 1.0});
  apply_settings(c, {{"scales", "1,3"}, {"blur-sigmas", "0,0.7"}});
  CHECK(c.spec.blur_sigma == std::vector<double>{0.0, 0.7});
  TrainConfig d;
  apply_settings(d, {{"patch-size", "4"}});
  CHECK_THROWS_AS(d.validate(), ConfigError);
}

TEST_CASE("digest ignores run-length settings only") {
  TrainConfig a, b;
  b.iterations = 7;
  b.log_every = 3;
  b.checkpoint_every = 2;
  CHECK(config_digest(a) == config_digest(b));
  b.weights.alpha = 2.0;
  CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("conventional MLP rejects patch-only losses") {
  TrainConfig c;
  c.patch_output = false;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.xpatch_loss = false;
  c.adversarial = false;
  CHECK_NOTHROW(c.validate());
}

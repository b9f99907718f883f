#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "knitwork/errors.hpp"
#include "knitwork/metrics.hpp"
#include "knitwork/trainer.hpp"
#include "tiny.hpp"

using namespace knitwork;
using knitwork::testing::test_image;
using knitwork::testing::tiny_config;

namespace {

TaskContext plain_task(const ImageGrid& img) {
  TaskContext t;
  t.target = img;
  return t;
}

bool all_zero_or_absent(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (g != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("sample_batch draws distinct in-range coordinates") {
  Rng rng(5);
  CoordinateBatch b = sample_batch(6, 7, 42, rng);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const PixelIndex& p : b.pixels) {
    CHECK(p.row < 6);
    CHECK(p.col < 7);
    seen.insert({p.row, p.col});
  }
  CHECK(seen.size() == 42);
  CHECK_THROWS_AS(sample_batch(6, 7, 43, rng), ContractError);
  CHECK_THROWS_AS(sample_batch(6, 7, 0, rng), ContractError);
}

TEST_CASE("sample_batch covers pixels uniformly") {
  // Each of 64 pixels has inclusion probability 8/64 per draw.
  Rng rng(11);
  std::vector<int> hits(64, 0);
  const int draws = 8000;
  for (int i = 0; i < draws; ++i) {
    for (const PixelIndex& p : sample_batch(8, 8, 8, rng).pixels) ++hits[p.row * 8 + p.col];
  }
  const double expected = draws / 8.0;
  const double sd = std::sqrt(draws * (1.0 / 8.0) * (7.0 / 8.0));
  for (int h : hits) CHECK(std::abs(h - expected) < 5.0 * sd);
}

TEST_CASE("training is deterministic for a seed") {
  const ImageGrid img = test_image(8, 8, 3);
  TrainState a = fit(plain_task(img), tiny_config());
  TrainState b = fit(plain_task(img), tiny_config());
  REQUIRE(a.history.size() == 4);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].report.total_g == b.history[i].report.total_g);
    CHECK(a.history[i].report.disc_bce == b.history[i].report.disc_bce);
  }
  CHECK(render(a).data == render(b).data);
  TrainConfig other = tiny_config();
  other.seed = 4;
  CHECK(render(fit(plain_task(img), other)).data != render(a).data);
}

TEST_CASE("checkpoint resume continues bit-identically") {
  testing::TempDir dir("ckpt");
  const ImageGrid img = test_image(8, 8, 3);
  TrainConfig cfg = tiny_config();
  cfg.iterations = 6;
  cfg.checkpoint_every = 3;
  FitOptions opts;
  opts.checkpoint_dir = dir.path().string();
  TrainState full = fit(plain_task(img), cfg, opts);

  TrainState resumed = init_state(plain_task(img), cfg);
  load_checkpoint(resumed, dir / "checkpoint_3.nkwk");
  CHECK(resumed.step == 3);
  fit(resumed);
  CHECK(resumed.step == 6);
  CHECK(render(resumed).data == render(full).data);
  CHECK(resumed.history.back().report.total_g == full.history.back().report.total_g);

  TrainConfig changed = cfg;
  changed.weights.alpha = 2.0;
  TrainState mismatch = init_state(plain_task(img), changed);
  CHECK_THROWS_AS(load_checkpoint(mismatch, dir / "checkpoint_3.nkwk"), IoError);
  CHECK_THROWS_AS(load_checkpoint(mismatch, dir / "missing.nkwk"), IoError);
}

TEST_CASE("discriminator and generator steps touch only their own weights") {
  const ImageGrid img = test_image(8, 8, 3);
  TrainState s = init_state(plain_task(img), tiny_config());
  CoordinateBatch batch = sample_batch(8, 8, 16, s.rng);
  const std::vector<double> g_before(s.generator.layers()[0].weight.data().begin(),
                                     s.generator.layers()[0].weight.data().end());
  const LossReport d = discriminator_step(s, batch);
  CHECK(d.disc_bce > 0.0);
  CHECK(all_zero_or_absent(s.generator_parameters()));
  CHECK(std::equal(g_before.begin(), g_before.end(), s.generator.layers()[0].weight.data().begin()));

  const std::vector<double> d_before(s.discriminator.layers()[0].weight.data().begin(),
                                     s.discriminator.layers()[0].weight.data().end());
  generator_step(s, batch);
  CHECK(all_zero_or_absent(s.discriminator.parameters()));
  CHECK(std::equal(d_before.begin(), d_before.end(), s.discriminator.layers()[0].weight.data().begin()));
  for (const Tensor& p : s.discriminator.parameters()) CHECK(p.requires_grad());
}

TEST_CASE("discriminator skips batches without fully known stacks") {
  const ImageGrid img = test_image(8, 8, 1);
  TaskContext t = plain_task(img);
  t.known_mask = ImageGrid(8, 8, 1, 1.0);
  t.known_mask.at(4, 4, 0) = 0.0;  // scale-4 footprints reach every pixel
  TrainState s = init_state(t, tiny_config());
  CoordinateBatch batch = sample_batch(8, 8, 16, s.rng);
  CHECK(discriminator_step(s, batch).disc_bce == 0.0);
}

TEST_CASE("a single-pixel image trains without cross-patch terms") {
  TrainConfig cfg = tiny_config();
  cfg.batch_size = 1;
  TrainState s = fit(plain_task(test_image(1, 1, 3)), cfg);
  for (const LossRecord& r : s.history) CHECK(r.report.xpatch == 0.0);
  CHECK(render(s).pixels() == 1);
}

TEST_CASE("conventional MLP fits a constant image") {
  ImageGrid img(8, 8, 3);
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    img.data[p * 3] = 0.2;
    img.data[p * 3 + 1] = 0.5;
    img.data[p * 3 + 2] = 0.7;
  }
  TrainConfig cfg = tiny_config();
  cfg.patch_output = cfg.xpatch_loss = cfg.adversarial = false;
  cfg.iterations = 400;
  cfg.lr_g = 1e-2;
  TrainState s = fit(plain_task(img), cfg);
  CHECK(s.history.back().report.recon < s.history.front().report.recon);
  CHECK(psnr(render(s), img) > 35.0);
}

TEST_CASE("setup validation") {
  const ImageGrid img = test_image(4, 4, 3);
  TrainConfig cfg = tiny_config();
  cfg.batch_size = 17;
  CHECK_THROWS_AS(init_state(plain_task(img), cfg), ConfigError);
  cfg.batch_size = 4;
  TaskContext t = plain_task(img);
  t.known_mask = ImageGrid(4, 4, 1, 0.0);
  CHECK_THROWS_AS(init_state(t, cfg), ContractError);
  t.known_mask = ImageGrid(4, 4, 3, 1.0);
  CHECK_THROWS_AS(init_state(t, cfg), DimensionError);
  ImageGrid bad = img;
  bad.data[0] = 1.5;
  CHECK_THROWS_AS(init_state(plain_task(bad), cfg), ContractError);
}

TEST_CASE("non-finite generator loss aborts with the batch") {
  TrainState s = init_state(plain_task(test_image(8, 8, 3)), tiny_config());
  s.generator.layers().back().bias.data()[0] = std::numeric_limits<double>::quiet_NaN();
  CoordinateBatch batch = sample_batch(8, 8, 16, s.rng);
  try {
    generator_step(s, batch);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
}

TEST_CASE("super-resolution trains on the fine grid") {
  TaskContext t;
  t.target = test_image(4, 4, 3);
  t.sr_factor = 2;
  t.learn_kernel = true;
  TrainConfig cfg = tiny_config();
  TrainState s = init_state(t, cfg);
  CHECK(s.kernel.support() == 3);
  const Tensor k0 = current_kernel(s);
  fit(s);
  for (const LossRecord& r : s.history) {
    CHECK(r.report.recon == 0.0);
    CHECK(r.report.down > 0.0);
    CHECK(r.report.disc_bce > 0.0);
  }
  const ImageGrid out = render(s);
  CHECK(out.height == 8);
  CHECK(out.width == 8);
  const Tensor k1 = current_kernel(s);
  CHECK(std::vector<double>(k0.data().begin(), k0.data().end()) !=
        std::vector<double>(k1.data().begin(), k1.data().end()));
}

TEST_CASE("loss CSV has one row per step") {
  testing::TempDir dir("csv");
  FitOptions opts;
  opts.loss_csv = dir / "loss.csv";
  fit(plain_task(test_image(8, 8, 3)), tiny_config(), opts);
  const std::string text = testing::read_file(opts.loss_csv);
  CHECK(text.rfind("step,recon,xpatch,pixel,gen_bce,disc_bce,total_g,down\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

#include "doctest.h"

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "knitwork/errors.hpp"
#include "knitwork/losses.hpp"
#include "oracles.hpp"

using namespace knitwork;
using namespace knitwork::testing;

namespace {

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

Tensor random_mask(Shape shape, Rng& rng) {
  Tensor m(std::move(shape));
  for (double& v : m.data()) v = rng.uniform() < 0.7 ? 1.0 : 0.0;
  return m;
}

}  // namespace

TEST_CASE("patch reconstruction loss") {
  Rng rng(1);
  Tensor pred = random_tensor({2, 4}, rng, 0, 1), truth = random_tensor({2, 4}, rng, 0, 1);
  Tensor ones(Shape{2, 4}, 1.0), zeros(Shape{2, 4}, 0.0);
  CHECK(patch_recon_loss(pred, pred, ones).item() == 0.0);
  CHECK(patch_recon_loss(pred, truth, zeros).item() == 0.0);
  Tensor mask = random_mask({2, 4}, rng);
  CHECK(patch_recon_loss(pred, truth, mask).item() ==
        doctest::Approx(recon_oracle(vec(pred), vec(truth), vec(mask), 2, 4)).epsilon(1e-12));
  CHECK(patch_recon_loss(pred, truth, ones).item() ==
        doctest::Approx(recon_oracle(vec(pred), vec(truth), vec(ones), 2, 4)).epsilon(1e-12));
  CHECK_THROWS_AS(patch_recon_loss(pred, Tensor(Shape{2, 3}), ones), DimensionError);
  Tensor fuzzy(Shape{2, 4}, 0.5);
  CHECK_THROWS_AS(patch_recon_loss(pred, truth, fuzzy), ContractError);
}

TEST_CASE("cross-patch loss matches the loop oracle on 4x4 grids") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    PatchSpec spec;
    spec.scale_weights = {1.0, 0.5, 2.0};
    const std::size_t C = trial % 2 ? 3 : 1;
    Tensor pred = random_tensor({16, spec.elements(C)}, rng, 0, 1);
    auto anchors = CoordinateBatch::full_grid(4, 4).pixels;
    const double got = cross_patch_loss(pred, PredictionField::full_grid(4, 4), anchors, spec, C).item();
    const double want = xpatch_oracle(vec(pred), 4, 4, spec.scales, spec.scale_weights, 3, C);
    CHECK(std::fabs(got - want) <= 1e-10 * std::max(1.0, std::fabs(want)));
  }
}

TEST_CASE("cross-patch loss of spatially constant stacks is zero") {
  PatchSpec spec;
  Tensor pred(Shape{25, 81}, 0.6);
  auto anchors = CoordinateBatch::full_grid(5, 5).pixels;
  CHECK(cross_patch_loss(pred, PredictionField::full_grid(5, 5), anchors, spec, 3).item() == 0.0);
}

TEST_CASE("a single pixel has no cross-patch terms") {
  PatchSpec spec;
  Rng rng(3);
  Tensor pred = random_tensor({1, 81}, rng);
  PixelIndex anchors[] = {{0, 0}};
  CHECK(cross_patch_loss(pred, PredictionField::full_grid(1, 1), anchors, spec, 3).item() == 0.0);
}

TEST_CASE("cross-patch loss needs predictions at shifted pixels") {
  PatchSpec spec;
  PredictionField field{3, 3, std::vector<long>(9, -1)};
  field.row_of_pixel[4] = 0;
  Tensor pred(Shape{1, 27}, 0.5);
  PixelIndex anchors[] = {{1, 1}};
  CHECK_THROWS_AS(cross_patch_loss(pred, field, anchors, spec, 1), ContractError);
}

TEST_CASE("pixel loss") {
  CHECK(pixel_loss(Tensor::from_rows({{0.5}}), Tensor::from_rows({{0.25}})).item() == 0.25);
  Rng rng(4);
  Tensor a = random_tensor({5, 3}, rng, 0, 1), b = random_tensor({5, 3}, rng, 0, 1);
  CHECK(pixel_loss(a, a).item() == 0.0);
  Tensor ones(Shape{5, 3}, 1.0);
  Tensor mask = random_mask({5, 3}, rng);
  CHECK(pixel_loss(a, b).item() == doctest::Approx(pixel_oracle(vec(a), vec(b), vec(ones))).epsilon(1e-14));
  CHECK(pixel_loss(a, b, mask).item() == doctest::Approx(pixel_oracle(vec(a), vec(b), vec(mask))).epsilon(1e-14));
}

TEST_CASE("discriminator loss") {
  const double eps = 1e-7;
  Tensor real(Shape{4}, 0.9), fake(Shape{4}, 0.0);
  const double bce_real = -(0.9 * std::log(0.9) + 0.1 * std::log(0.1));
  const double bce_fake = -std::log(1.0 - eps);
  CHECK(disc_loss(real, fake).item() == doctest::Approx(bce_real + bce_fake).epsilon(1e-12));
  CHECK(bce_real == doctest::Approx(0.325).epsilon(1e-3));

  Tensor perfect_real(Shape{3}, 1.0), perfect_fake(Shape{3}, 0.0);
  CHECK(disc_loss(perfect_real, perfect_fake, 0.0).item() < 1e-6);

  Tensor half(Shape{5}, 0.5);
  CHECK(disc_loss(half, half).item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-14));
  CHECK(bce_mean(half, 0.9).item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("generator adversarial loss") {
  CHECK(gen_adv_loss(Tensor(Shape{3}, 1.0)).item() < 1e-6);
  CHECK(gen_adv_loss(Tensor(Shape{3}, 0.5)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  Rng rng(5);
  Tensor s = random_tensor({7}, rng, 0.01, 0.99);
  double ns = 0.0, mm = 0.0;
  for (double v : s.data()) {
    ns -= std::log(v);
    mm += std::log(1.0 - v);
  }
  CHECK(gen_adv_loss(s).item() == doctest::Approx(ns / 7).epsilon(1e-13));
  CHECK(gen_adv_loss(s, GanForm::kMinimax).item() == doctest::Approx(mm / 7).epsilon(1e-13));
}

TEST_CASE("total generator loss assembly") {
  LossWeights w;
  w.alpha = w.beta = w.gamma = 1.0;
  GeneratorLossParts parts;
  CHECK(total_generator_loss(parts, w).total.item() == 0.0);
  parts.recon = parts.xpatch = parts.pixel = parts.gen_bce = Tensor::scalar(1.0);
  CHECK(total_generator_loss(parts, w).total.item() == 4.0);

  parts.recon = Tensor::scalar(0.5);
  parts.xpatch = Tensor::scalar(0.2);
  parts.pixel = Tensor::scalar(0.1);
  parts.gen_bce = Tensor::scalar(0.3);
  w.alpha = 2.0;
  w.gamma = 0.1;
  auto out = total_generator_loss(parts, w);
  CHECK(out.total.item() == doctest::Approx(1.03).epsilon(1e-14));
  const auto& r = out.report;
  CHECK(std::fabs(r.total_g - (r.recon + w.alpha * r.xpatch + w.beta * r.pixel + w.gamma * r.gen_bce)) < 1e-9);

  // Doubling alpha doubles the cross-patch contribution.
  LossWeights w2 = w;
  w2.alpha = 4.0;
  const double delta = total_generator_loss(parts, w2).total.item() - out.total.item();
  CHECK(delta == doctest::Approx(2.0 * 0.2).epsilon(1e-12));
  CHECK_THROWS_AS(total_generator_loss({Tensor(Shape{2})}, w), DimensionError);
  LossWeights bad;
  bad.beta = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("loss gradients against finite differences") {
  Rng rng(6);
  PatchSpec spec;
  for (int trial = 0; trial < 10; ++trial) {
    Tensor pred = random_tensor({9, 27}, rng, 0, 1), truth = random_tensor({9, 27}, rng, 0, 1);
    Tensor mask = random_mask({9, 27}, rng);
    CHECK(gradcheck([&] { return patch_recon_loss(pred, truth, mask); }, {pred}, rng).max_rel_error < 1e-4);
    auto anchors = CoordinateBatch::full_grid(3, 3).pixels;
    auto field = PredictionField::full_grid(3, 3);
    CHECK(gradcheck([&] { return cross_patch_loss(pred, field, anchors, spec, 1); }, {pred}, rng).max_rel_error < 1e-4);
    Tensor colors = random_tensor({9, 3}, rng, 0, 1), target = random_tensor({9, 3}, rng, 0, 1);
    CHECK(gradcheck([&] { return pixel_loss(colors, target); }, {colors}, rng).max_rel_error < 1e-4);
    Tensor real = random_tensor({6, 1}, rng, 0.05, 0.95), fake = random_tensor({6, 1}, rng, 0.05, 0.95);
    CHECK(gradcheck([&] { return disc_loss(real, fake); }, {real, fake}, rng).max_rel_error < 1e-4);
    CHECK(gradcheck([&] { return gen_adv_loss(fake); }, {fake}, rng).max_rel_error < 1e-4);
    CHECK(gradcheck([&] { return gen_adv_loss(fake, GanForm::kMinimax); }, {fake}, rng).max_rel_error < 1e-4);
    LossWeights w{0.7, 1.3, 0.2, 5.0};
    Tensor parts = random_tensor({5}, rng);
    auto total = [&] {
      GeneratorLossParts p;
      p.recon = sum(square(slice_rows(reshape(parts, {5, 1}), 0, 1)));
      p.xpatch = sum(square(slice_rows(reshape(parts, {5, 1}), 1, 2)));
      p.pixel = sum(square(slice_rows(reshape(parts, {5, 1}), 2, 3)));
      p.gen_bce = sum(square(slice_rows(reshape(parts, {5, 1}), 3, 4)));
      p.down = sum(square(slice_rows(reshape(parts, {5, 1}), 4, 5)));
      return total_generator_loss(p, w).total;
    };
    CHECK(gradcheck(total, {parts}, rng).max_rel_error < 1e-4);
  }
}

TEST_CASE("downsampling loss averages channels and sums pixels") {
  Rng rng(77);
  Tensor a = random_tensor({3, 4, 3}, rng, 0, 1), b = random_tensor({3, 4, 3}, rng, 0, 1);
  double want = 0.0;
  for (std::size_t p = 0; p < 12; ++p) {
    double px = 0.0;
    for (std::size_t c = 0; c < 3; ++c) px += std::pow(a.at(p * 3 + c) - b.at(p * 3 + c), 2);
    want += px / 3.0;
  }
  CHECK(std::fabs(downsampling_loss(a, b).item() - want) < 1e-12);
  CHECK(downsampling_loss(a, a).item() == 0.0);
  CHECK_THROWS_AS(downsampling_loss(a, Tensor(Shape{3, 4, 1})), DimensionError);
  CHECK(gradcheck([&] { return downsampling_loss(a, b); }, {a}, rng).max_rel_error < 1e-6);
}

#include "doctest.h"

#include <cmath>
#include <vector>

#include "knitwork/errors.hpp"
#include "knitwork/losses.hpp"
#include "knitwork/patching.hpp"
#include "knitwork/random.hpp"
#include "oracles.hpp"

using namespace knitwork;

namespace {

ImageGrid random_image(std::size_t h, std::size_t w, std::size_t c, Rng& rng) {
  ImageGrid img(h, w, c);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

// Mirror without edge repeat, written independently of reflect_index.
long mirror(long i, long n) {
  while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
  return i;
}

}  // namespace

TEST_CASE("reflect index") {
  CHECK(reflect_index(-1, 5) == 1);
  CHECK(reflect_index(5, 5) == 3);
  CHECK(reflect_index(-9, 5) == 1);
  CHECK(reflect_index(3, 1) == 0);
}

TEST_CASE("spec validation") {
  PatchSpec spec;
  CHECK_NOTHROW(spec.validate());
  CHECK(spec.elements(3) == 81);
  spec.patch_size = 4;
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK_THROWS_AS(PatchSpec::with_scales({2, 4}).validate(), ConfigError);
  CHECK_THROWS_AS(PatchSpec::with_scales({1, 4, 2}).validate(), ConfigError);
  auto s = PatchSpec::with_scales({1, 2, 4});
  CHECK(s.blur_sigma == std::vector<double>{0.0, 1.0, 2.0});
}

TEST_CASE("gaussian blur examples") {
  Rng rng(1);
  ImageGrid img = random_image(7, 5, 3, rng);
  CHECK(gaussian_blur(img, 0.0).data == img.data);

  ImageGrid flat(9, 9, 1, 0.37);
  for (double v : gaussian_blur(flat, 1.3).data) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));

  ImageGrid impulse(9, 9, 1, 0.0);
  impulse.at(4, 4, 0) = 1.0;
  // Truncated kernel at radius 3, normalized; peak is 1/Z^2 with Z the 1-D sum.
  double z = 0.0;
  for (int i = -3; i <= 3; ++i) z += std::exp(-0.5 * i * i);
  CHECK(gaussian_blur(impulse, 1.0).at(4, 4, 0) == doctest::Approx(1.0 / (z * z)).epsilon(1e-14));
}

TEST_CASE("extract stack on a constant image") {
  ImageGrid img(8, 8, 3, 0.25);
  auto st = extract_stack(img, {0, 7}, PatchSpec{});
  CHECK(st.values.size() == 81);
  for (double v : st.values) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("scale 1 of a ramp is the exact neighborhood") {
  ImageGrid img(9, 9, 1);
  for (std::size_t r = 0; r < 9; ++r)
    for (std::size_t c = 0; c < 9; ++c) img.at(r, c, 0) = (r * 9.0 + c) / 81.0;
  auto st = extract_stack(img, {4, 4}, PatchSpec{});
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) CHECK(st.values[a * 3 + b] == img.at(3 + a, 3 + b, 0));
}

TEST_CASE("blurred scales match a brute-force extraction") {
  ImageGrid img(12, 12, 1);
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = 0; c < 12; ++c) img.at(r, c, 0) = (r + c) % 2 ? 1.0 : 0.0;
  PatchSpec spec;
  const PixelIndex center{6, 6};
  auto st = extract_stack(img, center, spec);
  for (std::size_t s = 0; s < 3; ++s) {
    const double sigma = spec.blur_sigma[s];
    const long rad = sigma == 0.0 ? 0 : static_cast<long>(std::ceil(3 * sigma));
    std::vector<double> k;
    double z = 0.0;
    for (long t = -rad; t <= rad; ++t) {
      k.push_back(sigma == 0.0 ? 1.0 : std::exp(-0.5 * t * t / (sigma * sigma)));
      z += k.back();
    }
    const long f = static_cast<long>(spec.scales[s]);
    for (long a = -1; a <= 1; ++a) {
      for (long b = -1; b <= 1; ++b) {
        const long y = mirror(6 + f * a, 12), x = mirror(6 + f * b, 12);
        double v = 0.0;
        for (long u = -rad; u <= rad; ++u)
          for (long w = -rad; w <= rad; ++w)
            v += k[u + rad] * k[w + rad] / (z * z) * img.at(mirror(y + u, 12), mirror(x + w, 12), 0);
        CHECK(st.values[s * 9 + (a + 1) * 3 + (b + 1)] == doctest::Approx(v).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("mask stacks") {
  PatchSpec spec;
  ImageGrid known(16, 16, 1, 1.0);
  for (double v : extract_mask_stack(known, {3, 3}, spec, 3).values) CHECK(v == 1.0);

  ImageGrid holed = known;
  for (std::size_t r = 5; r < 11; ++r)
    for (std::size_t c = 5; c < 11; ++c) holed.at(r, c, 0) = 0.0;
  auto center = extract_mask_stack(holed, {8, 8}, spec, 1);
  for (std::size_t i = 0; i < 9; ++i) CHECK(center.values[i] == 0.0);

  // Straddling the edge: brute-force footprint check.
  for (PixelIndex x : {PixelIndex{4, 8}, PixelIndex{11, 11}, PixelIndex{0, 5}}) {
    auto st = extract_mask_stack(holed, x, spec, 1);
    for (std::size_t s = 0; s < 3; ++s) {
      const long f = static_cast<long>(spec.scales[s]);
      for (long a = -1; a <= 1; ++a) {
        for (long b = -1; b <= 1; ++b) {
          const long ty = mirror(static_cast<long>(x.row) + f * a, 16);
          const long tx = mirror(static_cast<long>(x.col) + f * b, 16);
          double expect = 1.0;
          for (long u = -f / 2; u <= f / 2; ++u)
            for (long w = -f / 2; w <= f / 2; ++w)
              if (holed.at(mirror(ty + u, 16), mirror(tx + w, 16), 0) == 0.0) expect = 0.0;
          CHECK(st.values[s * 9 + (a + 1) * 3 + (b + 1)] == expect);
        }
      }
    }
  }
}

TEST_CASE("shrinking the hole never clears a mask element") {
  PatchSpec spec;
  ImageGrid big(16, 16, 1, 1.0), small(16, 16, 1, 1.0);
  for (std::size_t r = 4; r < 12; ++r)
    for (std::size_t c = 4; c < 12; ++c) big.at(r, c, 0) = 0.0;
  for (std::size_t r = 6; r < 10; ++r)
    for (std::size_t c = 6; c < 10; ++c) small.at(r, c, 0) = 0.0;
  auto mb = all_mask_stacks(big, spec, 1), ms = all_mask_stacks(small, spec, 1);
  for (std::size_t i = 0; i < mb.size(); ++i) CHECK(ms[i] >= mb[i]);
}

TEST_CASE("shift map examples") {
  PatchSpec spec;
  ShiftMap map = shift_map(spec);
  REQUIRE(map.entries.size() == 27);
  CHECK(map.center == 4);
  auto find = [&](std::size_t s, long di, long dj) {
    for (const auto& e : map.entries)
      if (e.scale_index == s && e.row_offset == di && e.col_offset == dj) return e;
    FAIL("missing entry");
    return ShiftEntry{};
  };
  auto e0 = find(0, 0, 0);
  CHECK((e0.shift_row == 0 && e0.shift_col == 0));
  auto e1 = find(0, 1, 0);
  CHECK((e1.shift_row == -1 && e1.shift_col == 0));
  auto e4 = find(2, -1, 1);
  CHECK((e4.shift_row == 4 && e4.shift_col == -4));
  for (const auto& e : map.entries) {
    const long f = static_cast<long>(spec.scales[e.scale_index]);
    CHECK(e.shift_row % f == 0);
    CHECK(e.shift_col % f == 0);
  }
  CHECK_FALSE(map.in_bounds({0, 0}, e1, 4, 4));
  CHECK(map.in_bounds({1, 0}, e1, 4, 4));
}

TEST_CASE("scale-1 central elements reassemble the image") {
  Rng rng(8);
  ImageGrid img = random_image(6, 5, 3, rng);
  PatchExtractor ex(img, PatchSpec{});
  auto stacks = ex.all_stacks();
  const std::size_t d = ex.stack_size();
  for (std::size_t p = 0; p < img.pixels(); ++p)
    for (std::size_t c = 0; c < 3; ++c) CHECK(stacks[p * d + 4 * 3 + c] == img.data[p * 3 + c]);
}

TEST_CASE("ground-truth stacks are cross-patch consistent at scale 1") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    ImageGrid img = random_image(9, 7, 3, rng);
    PatchSpec spec;
    spec.scale_weights = {1.0, 0.0, 0.0};
    PatchExtractor ex(img, spec);
    Tensor pred(Shape{img.pixels(), ex.stack_size()}, ex.all_stacks());
    auto field = PredictionField::full_grid(9, 7);
    std::vector<PixelIndex> anchors = CoordinateBatch::full_grid(9, 7).pixels;
    CHECK(cross_patch_loss(pred, field, anchors, spec, 3).item() == 0.0);
  }
}

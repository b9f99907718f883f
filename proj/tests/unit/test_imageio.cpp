#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "knitwork/errors.hpp"
#include "knitwork/imageio.hpp"
#include "knitwork/random.hpp"

using namespace knitwork;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "knitwork_imageio_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("one white pixel") {
  ImageGrid img(1, 1, 1, 1.0);
  const auto path = scratch("white.png").string();
  save_png(img, path);
  ImageGrid back = load_png(path);
  CHECK(back.height == 1);
  CHECK(back.channels == 1);
  CHECK(back.data == std::vector<double>{1.0});
}

TEST_CASE("8-bit round trip is exact") {
  Rng rng(1);
  for (std::size_t channels : {1u, 3u}) {
    ImageGrid img(7, 5, channels);
    for (double& v : img.data) v = static_cast<double>(rng.below(256)) / 255.0;
    const auto path = scratch("rt.png").string();
    save_png(img, path);
    ImageGrid back = load_png(path);
    REQUIRE(back.same_shape(img));
    CHECK(back.data == img.data);
  }
}

TEST_CASE("quantization rounds half to even") {
  CHECK(quantize_8bit(0.5 / 255.0) == 0);
  CHECK(quantize_8bit(1.5 / 255.0) == 2);
  CHECK(quantize_8bit(2.5 / 255.0) == 2);
  CHECK(quantize_8bit(-0.3) == 0);
  CHECK(quantize_8bit(1.7) == 255);
}

TEST_CASE("bad files give clean errors") {
  CHECK_THROWS_AS(load_png(scratch("missing.png").string()), IoError);
  ImageGrid img(16, 16, 3, 0.5);
  const auto path = scratch("trunc.png").string();
  save_png(img, path);
  const auto size = fs::file_size(path);
  fs::resize_file(path, size / 2);
  CHECK_THROWS_AS(load_png(path), IoError);
  std::ofstream(scratch("text.png")) << "not an image";
  CHECK_THROWS_AS(load_png(scratch("text.png").string()), IoError);
}

TEST_CASE("mask png: nonzero is known") {
  ImageGrid m(2, 2, 1, 0.0);
  m.at(0, 1, 0) = 0.2;
  m.at(1, 1, 0) = 1.0;
  const auto path = scratch("mask.png").string();
  save_png(m, path);
  ImageGrid k = load_mask_png(path);
  CHECK(k.data == std::vector<double>{0, 1, 0, 1});
}

TEST_CASE("delta kernel downsample is plain subsampling") {
  Rng rng(2);
  ImageGrid img(8, 6, 3);
  for (double& v : img.data) v = rng.uniform();
  ImageGrid lo = degrade_downsample(img, make_downsampling_kernel(KernelKind::kDelta, 2), 2);
  REQUIRE(lo.height == 4);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < 3; ++k) CHECK(lo.at(r, c, k) == img.at(2 * r, 2 * c, k));
}

TEST_CASE("named kernels") {
  for (KernelKind kind : {KernelKind::kDelta, KernelKind::kRoundGaussian, KernelKind::kDiagonalGaussian}) {
    Tensor k = make_downsampling_kernel(kind, 2);
    double total = 0.0;
    for (double v : k.data()) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(k.dim(0) % 2 == 1);
    CHECK(parse_kernel_kind(kernel_kind_name(kind)) == kind);
  }
  Tensor d = make_downsampling_kernel(KernelKind::kDiagonalGaussian, 2);
  const std::size_t n = d.dim(0), c = n / 2;
  // Mass spreads along the main diagonal, not the anti-diagonal.
  CHECK(d.at((c + 2) * n + c + 2) > 10 * d.at((c + 2) * n + c - 2));
  CHECK_THROWS_AS(parse_kernel_kind("box"), ConfigError);
}

TEST_CASE("kernel larger than the image is rejected") {
  ImageGrid img(4, 4, 1, 0.5);
  CHECK_THROWS_AS(degrade_downsample(img, make_downsampling_kernel(KernelKind::kDiagonalGaussian, 2), 2),
                  ContractError);
}

TEST_CASE("diagonal kernel smears anisotropically") {
  // Small square block; its corners smear along the main diagonal, so
  // differences along the anti-diagonal carry more energy.
  auto energy_ratio = [](const ImageGrid& img) {
    double along_anti = 0.0, along_main = 0.0;
    for (std::size_t r = 1; r + 1 < img.height; ++r)
      for (std::size_t c = 1; c + 1 < img.width; ++c) {
        along_main += std::pow(img.at(r + 1, c + 1, 0) - img.at(r, c, 0), 2);
        along_anti += std::pow(img.at(r + 1, c - 1, 0) - img.at(r, c, 0), 2);
      }
    return along_anti / along_main;
  };
  ImageGrid block(64, 64, 1, 0.0);
  for (std::size_t r = 30; r < 34; ++r)
    for (std::size_t c = 30; c < 34; ++c) block.at(r, c, 0) = 1.0;
  ImageGrid diag = degrade_downsample(block, make_downsampling_kernel(KernelKind::kDiagonalGaussian, 2), 2);
  ImageGrid round = degrade_downsample(block, make_downsampling_kernel(KernelKind::kRoundGaussian, 2), 2);
  CHECK(energy_ratio(diag) > 1.5);
  CHECK(energy_ratio(round) < 1.2);
}

TEST_CASE("gaussian noise") {
  ImageGrid img(256, 256, 1, 0.5);
  CHECK(degrade_add_noise(img, 0.0, 3).data == img.data);
  ImageGrid a = degrade_add_noise(img, 10.0, 3), b = degrade_add_noise(img, 10.0, 3);
  CHECK(a.data == b.data);
  double s2 = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s2 += std::pow(a.data[i] - 0.5, 2);
  const double std_dev = std::sqrt(s2 / static_cast<double>(a.data.size()));
  CHECK(std::fabs(std_dev - 10.0 / 255.0) < 0.05 * 10.0 / 255.0);
  ImageGrid heavy = degrade_add_noise(img, 200.0, 4);
  for (double v : heavy.data) CHECK((v >= 0.0 && v <= 1.0));
}

TEST_CASE("cut hole") {
  ImageGrid img(10, 12, 3, 0.7);
  Rect hole{2, 3, 4, 5};
  auto out = degrade_cut_hole(img, hole);
  std::size_t zeros = 0;
  for (double v : out.known_mask.data) zeros += v == 0.0;
  CHECK(zeros == hole.area());
  CHECK(out.image.at(3, 4, 1) == 0.0);
  CHECK(out.image.at(0, 0, 1) == 0.7);
  CHECK_THROWS_AS(degrade_cut_hole(img, Rect{8, 0, 3, 2}), ContractError);
}

#include "doctest.h"

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "knitwork/encoding.hpp"
#include "knitwork/errors.hpp"

using namespace knitwork;

TEST_CASE("normalized coordinates sit at pixel centers") {
  auto batch = CoordinateBatch::from_pixels(4, 8, {{0, 0}, {3, 7}});
  CHECK(batch.normalized[0][0] == 0.125);
  CHECK(batch.normalized[0][1] == 0.0625);
  CHECK(batch.normalized[1][0] == 0.875);
  CHECK(batch.normalized[1][1] == 0.9375);
}

TEST_CASE("batch validation") {
  CHECK_THROWS_AS(CoordinateBatch::from_pixels(2, 2, {{0, 0}, {0, 0}}), ContractError);
  CHECK_THROWS_AS(CoordinateBatch::from_pixels(2, 2, {{2, 0}}), ContractError);
  auto grid = CoordinateBatch::full_grid(3, 2);
  REQUIRE(grid.size() == 6);
  CHECK(grid.pixels[3] == PixelIndex{1, 1});
}

TEST_CASE("zero projection gives all-ones cosines and zero sines") {
  FourierEncoding enc(std::vector<double>(6, 0.0));
  Tensor f = enc.encode(CoordinateBatch::full_grid(2, 2));
  CHECK(f.shape() == Shape{4, 6});
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(f.at(i * 6 + j) == 1.0);
    for (std::size_t j = 3; j < 6; ++j) CHECK(f.at(i * 6 + j) == 0.0);
  }
}

TEST_CASE("single frequency at half turn") {
  FourierEncoding enc(std::vector<double>{1.0, 0.0});
  const std::array<double, 2> v[] = {{0.5, 0.3}};
  Tensor f = enc.encode(v);
  CHECK(f.at(0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::fabs(f.at(1)) < 1e-15);
}

TEST_CASE("16x16 grid with the default encoding") {
  FourierEncoding enc(128, 10.0, 1);
  Tensor f = enc.encode(CoordinateBatch::full_grid(16, 16));
  CHECK(f.shape() == Shape{256, 256});
  for (double v : f.data()) CHECK((v >= -1.0 && v <= 1.0));
}

TEST_CASE("distinct grid coordinates map to distinct rows") {
  FourierEncoding enc(128, 10.0, 3);
  Tensor f = enc.encode(CoordinateBatch::full_grid(64, 64));
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < 64 * 64; ++i) {
    rows.insert(std::vector<double>(f.data().begin() + i * 256, f.data().begin() + (i + 1) * 256));
  }
  CHECK(rows.size() == 64 * 64);
}

TEST_CASE("same seed gives the same projection") {
  CHECK(FourierEncoding(16, 10.0, 42).projection() == FourierEncoding(16, 10.0, 42).projection());
  CHECK(FourierEncoding(16, 10.0, 42).projection() != FourierEncoding(16, 10.0, 43).projection());
}

TEST_CASE("coordinates beyond the one-pixel margin are rejected") {
  FourierEncoding enc(4, 1.0, 0);
  const std::array<double, 2> inside[] = {{-0.05, 1.05}};
  const std::array<double, 2> outside[] = {{-0.2, 0.5}};
  CHECK_NOTHROW(enc.encode(inside, 0.1, 0.1));
  CHECK_THROWS_AS(enc.encode(outside, 0.1, 0.1), ContractError);
  CHECK_THROWS_AS(enc.encode(std::span<const std::array<double, 2>>{}), ContractError);
}

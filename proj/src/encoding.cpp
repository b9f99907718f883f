#include "knitwork/encoding.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "knitwork/errors.hpp"
#include "knitwork/random.hpp"

namespace knitwork {

CoordinateBatch CoordinateBatch::from_pixels(std::size_t height, std::size_t width,
                                             std::vector<PixelIndex> pixels) {
  CoordinateBatch batch;
  batch.grid_height = height;
  batch.grid_width = width;
  std::vector<bool> seen(height * width, false);
  batch.normalized.reserve(pixels.size());
  for (const PixelIndex& p : pixels) {
    if (p.row >= height || p.col >= width) {
      throw ContractError("coordinate (" + std::to_string(p.row) + ", " + std::to_string(p.col) +
                          ") outside " + std::to_string(height) + "x" + std::to_string(width) +
                          " grid");
    }
    if (seen[p.row * width + p.col]) throw ContractError("duplicate coordinate in batch");
    seen[p.row * width + p.col] = true;
    batch.normalized.push_back({(static_cast<double>(p.row) + 0.5) / static_cast<double>(height),
                                (static_cast<double>(p.col) + 0.5) / static_cast<double>(width)});
  }
  batch.pixels = std::move(pixels);
  return batch;
}

CoordinateBatch CoordinateBatch::full_grid(std::size_t height, std::size_t width) {
  std::vector<PixelIndex> pixels;
  pixels.reserve(height * width);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) pixels.push_back({r, c});
  }
  return from_pixels(height, width, std::move(pixels));
}

FourierEncoding::FourierEncoding(std::size_t frequencies, double sigma, std::uint64_t seed) {
  if (frequencies == 0) throw ConfigError("Fourier encoding needs at least one frequency");
  if (!(sigma >= 0.0)) throw ConfigError("Fourier encoding sigma must be non-negative");
  Rng rng(seed);
  projection_.resize(frequencies * 2);
  for (double& b : projection_) b = sigma * rng.normal();
}

FourierEncoding::FourierEncoding(std::vector<double> projection) : projection_(std::move(projection)) {
  if (projection_.empty() || projection_.size() % 2 != 0) {
    throw DimensionError("Fourier projection must be an m x 2 matrix");
  }
}

Tensor FourierEncoding::encode(const CoordinateBatch& coords) const {
  return encode(coords.normalized, 1.0 / static_cast<double>(coords.grid_height),
                1.0 / static_cast<double>(coords.grid_width));
}

Tensor FourierEncoding::encode(std::span<const std::array<double, 2>> normalized, double row_margin,
                               double col_margin) const {
  if (normalized.empty()) throw ContractError("encode: empty coordinate batch");
  const std::size_t m = frequencies();
  Tensor out(Shape{normalized.size(), 2 * m});
  auto d = out.data();
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto [u, v] = normalized[i];
    if (u < -row_margin || u > 1.0 + row_margin || v < -col_margin || v > 1.0 + col_margin) {
      throw ContractError("encode: coordinate (" + std::to_string(u) + ", " + std::to_string(v) +
                          ") outside the unit square beyond the allowed margin");
    }
    double* row = d.data() + i * 2 * m;
    for (std::size_t f = 0; f < m; ++f) {
      const double phase = 2.0 * std::numbers::pi * (projection_[2 * f] * u + projection_[2 * f + 1] * v);
      row[f] = std::cos(phase);
      row[m + f] = std::sin(phase);
    }
  }
  return out;
}

}  // namespace knitwork

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "knitwork/tensor.hpp"

namespace knitwork {

struct PixelIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const PixelIndex&) const = default;
};

// Pixel-center coordinates of a set of grid pixels.
struct CoordinateBatch {
  std::size_t grid_height = 0;
  std::size_t grid_width = 0;
  std::vector<PixelIndex> pixels;
  std::vector<std::array<double, 2>> normalized;  // ((row+0.5)/H, (col+0.5)/W)

  std::size_t size() const { return pixels.size(); }

  // Throws ContractError on out-of-grid or duplicate pixels.
  static CoordinateBatch from_pixels(std::size_t height, std::size_t width,
                                     std::vector<PixelIndex> pixels);
  // Row-major order, so row i of any per-coordinate output is pixel i.
  static CoordinateBatch full_grid(std::size_t height, std::size_t width);
};

// Fixed random Fourier feature map v -> [cos(2 pi B v), sin(2 pi B v)].
class FourierEncoding {
 public:
  FourierEncoding(std::size_t frequencies, double sigma, std::uint64_t seed);
  // Explicit projection, row-major frequencies x 2.
  explicit FourierEncoding(std::vector<double> projection);

  std::size_t frequencies() const { return projection_.size() / 2; }
  std::size_t feature_dim() const { return projection_.size(); }
  const std::vector<double>& projection() const { return projection_; }

  // N x 2m features. Coordinates may leave [0, 1] by at most one pixel.
  Tensor encode(const CoordinateBatch& coords) const;
  // Raw normalized coordinates with an explicit tolerance outside [0, 1].
  Tensor encode(std::span<const std::array<double, 2>> normalized, double row_margin = 0.0,
                double col_margin = 0.0) const;

 private:
  std::vector<double> projection_;
};

}  // namespace knitwork

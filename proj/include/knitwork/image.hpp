#pragma once

#include <cstddef>
#include <vector>

#include "knitwork/tensor.hpp"

namespace knitwork {

// Row-major H x W x C image. Values are normalized colors in [0, 1] whenever
// the image crosses a module boundary.
struct ImageGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  ImageGrid() = default;
  ImageGrid(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), data(h * w * c, fill) {}

  std::size_t pixels() const { return height * width; }
  double& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data[(r * width + c) * channels + ch];
  }
  double at(std::size_t r, std::size_t c, std::size_t ch) const {
    return data[(r * width + c) * channels + ch];
  }
  bool same_shape(const ImageGrid& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  // [H x W x C] tensor copy, optionally gradient-tracked.
  Tensor to_tensor(bool requires_grad = false) const;
  static ImageGrid from_tensor(const Tensor& t);
};

// Mirror an index into [0, n) without repeating the edge sample
// (-1 -> 1, n -> n - 2). Works for offsets larger than n.
inline std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - m);
}

// Clamp every value into [0, 1].
void clamp_unit(ImageGrid& img);
// Throws ContractError if any value lies outside [0, 1] or channels not in {1, 3}.
void require_unit_image(const ImageGrid& img, const char* what);

}  // namespace knitwork

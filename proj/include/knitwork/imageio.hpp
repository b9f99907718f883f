#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "knitwork/image.hpp"
#include "knitwork/tensor.hpp"

namespace knitwork {

// 8-bit gray or RGB PNG -> [0, 1]. Alpha is dropped, palettes expanded and
// 16-bit samples rescaled (with a warning on stderr).
ImageGrid load_png(const std::string& path);
// Quantizes with round-half-to-even after clamping to [0, 1].
void save_png(const ImageGrid& img, const std::string& path);
// Mask PNG: nonzero -> 1 (known), zero -> 0. Single channel result.
ImageGrid load_mask_png(const std::string& path);

std::uint8_t quantize_8bit(double v);

struct Rect {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t area() const { return height * width; }
};

enum class KernelKind { kDelta, kRoundGaussian, kDiagonalGaussian };

KernelKind parse_kernel_kind(const std::string& name);
std::string kernel_kind_name(KernelKind kind);

// Normalized odd-sized [K x K] kernel for a downscale factor:
// delta 1x1; round Gaussian sigma = factor / 2; diagonal Gaussian with major
// axis along the main diagonal, sigma_major = factor, sigma_minor = factor / 4.
Tensor make_downsampling_kernel(KernelKind kind, std::size_t factor);

// Convolve (reflect padding) with `kernel` then keep every factor-th pixel.
ImageGrid degrade_downsample(const ImageGrid& img, const Tensor& kernel, std::size_t factor);
// Additive N(0, (sigma/255)^2) noise, clamped to [0, 1]. sigma in 8-bit units.
ImageGrid degrade_add_noise(const ImageGrid& img, double sigma_8bit, std::uint64_t seed);

struct HoleResult {
  ImageGrid image;       // hole pixels set to 0
  ImageGrid known_mask;  // 1 outside the hole, 0 inside
};
HoleResult degrade_cut_hole(const ImageGrid& img, const Rect& hole);
ImageGrid hole_mask(std::size_t height, std::size_t width, const Rect& hole);

// 64-bit FNV-1a digest of a file's bytes / of a string.
std::uint64_t fnv1a64(const std::string& bytes);
std::uint64_t file_digest(const std::string& path);

}  // namespace knitwork

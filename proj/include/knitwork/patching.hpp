#pragma once

#include <cstddef>
#include <vector>

#include "knitwork/encoding.hpp"
#include "knitwork/image.hpp"

namespace knitwork {

// Geometry of a multi-scale patch stack. Element layout is
// [scale][row offset][col offset][channel], flattened.
struct PatchSpec {
  std::size_t patch_size = 3;
  std::vector<std::size_t> scales{1, 2, 4};
  // Pre-filter sigma per scale; scale 1 always samples the raw image.
  std::vector<double> blur_sigma{0.0, 1.0, 2.0};
  // Per-scale weight of the cross-patch consistency terms.
  std::vector<double> scale_weights{1.0, 1.0, 1.0};

  // Default blur 0.5 * f and unit weights for the given scales.
  static PatchSpec with_scales(std::vector<std::size_t> scales, std::size_t patch_size = 3);
  // Throws ConfigError when the invariants do not hold.
  void validate() const;

  std::size_t num_scales() const { return scales.size(); }
  std::size_t radius() const { return patch_size / 2; }
  std::size_t spatial_elements() const { return scales.size() * patch_size * patch_size; }
  std::size_t elements(std::size_t channels) const { return spatial_elements() * channels; }
  // Spatial index of the central element of the first (finest) scale.
  std::size_t center_spatial() const { return radius() * patch_size + radius(); }
};

struct PatchStack {
  PixelIndex coordinate;
  std::vector<double> values;  // S * p * p * C
};

struct MaskStack {
  PixelIndex coordinate;
  std::vector<double> values;  // entries in {0, 1}, same layout as PatchStack
};

// Separable Gaussian, reflect-padded, kernel truncated at ceil(3 sigma) and
// normalized to unit sum. sigma == 0 returns the input unchanged.
ImageGrid gaussian_blur(const ImageGrid& img, double sigma);
std::vector<double> gaussian_kernel_1d(double sigma);

// Samples ground-truth stacks from one image; the blurred copies per scale are
// computed once on construction.
class PatchExtractor {
 public:
  PatchExtractor(const ImageGrid& img, PatchSpec spec);

  const PatchSpec& spec() const { return spec_; }
  std::size_t stack_size() const { return spec_.elements(channels_); }
  PatchStack stack(PixelIndex coord) const;
  // Writes the flattened stack for `coord` to out[0 .. stack_size()).
  void stack_into(PixelIndex coord, double* out) const;
  // All pixels in row-major order: (H*W) x stack_size().
  std::vector<double> all_stacks() const;

 private:
  PatchSpec spec_;
  std::size_t height_, width_, channels_;
  std::vector<ImageGrid> per_scale_;
};

PatchStack extract_stack(const ImageGrid& img, PixelIndex coord, const PatchSpec& spec);

// known_mask is a single-channel binary image (1 = known).
MaskStack extract_mask_stack(const ImageGrid& known_mask, PixelIndex coord, const PatchSpec& spec,
                             std::size_t channels);
// All pixels in row-major order: (H*W) x elements(channels).
std::vector<double> all_mask_stacks(const ImageGrid& known_mask, const PatchSpec& spec,
                                    std::size_t channels);

struct ShiftEntry {
  std::size_t scale_index = 0;
  long row_offset = 0;  // within-patch offset (di)
  long col_offset = 0;  // within-patch offset (dj)
  long shift_row = 0;   // s = -f * di
  long shift_col = 0;   // s = -f * dj
};

// For each spatial element i, the shift s such that element i of the stack at
// x + s covers pixel x.
struct ShiftMap {
  std::vector<ShiftEntry> entries;  // one per spatial element
  std::size_t center = 0;           // spatial index o

  // Whether x + s lies inside an H x W grid.
  bool in_bounds(PixelIndex x, const ShiftEntry& e, std::size_t height, std::size_t width) const;
};

ShiftMap shift_map(const PatchSpec& spec);

}  // namespace knitwork

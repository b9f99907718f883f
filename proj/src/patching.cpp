#include "knitwork/patching.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "knitwork/errors.hpp"

namespace knitwork {

PatchSpec PatchSpec::with_scales(std::vector<std::size_t> scales, std::size_t patch_size) {
  PatchSpec spec;
  spec.patch_size = patch_size;
  spec.blur_sigma.clear();
  for (std::size_t f : scales) spec.blur_sigma.push_back(f == 1 ? 0.0 : 0.5 * static_cast<double>(f));
  spec.scale_weights.assign(scales.size(), 1.0);
  spec.scales = std::move(scales);
  return spec;
}

void PatchSpec::validate() const {
  if (patch_size == 0 || patch_size % 2 == 0) {
    throw ConfigError("patch size must be a positive odd integer, got " + std::to_string(patch_size));
  }
  if (scales.empty() || scales.front() != 1) throw ConfigError("the first patch scale must be 1");
  for (std::size_t i = 1; i < scales.size(); ++i) {
    if (scales[i] <= scales[i - 1]) throw ConfigError("patch scales must be strictly increasing");
  }
  if (blur_sigma.size() != scales.size() || scale_weights.size() != scales.size()) {
    throw ConfigError("blur sigmas and scale weights need one entry per scale");
  }
  for (double s : blur_sigma) {
    if (!(s >= 0.0)) throw ConfigError("blur sigma must be non-negative");
  }
  for (double w : scale_weights) {
    if (!(w >= 0.0)) throw ConfigError("scale weights must be non-negative");
  }
}

std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma >= 0.0)) throw ContractError("gaussian sigma must be non-negative");
  if (sigma == 0.0) return {1.0};
  const long radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    total += v;
  }
  for (double& v : k) v /= total;
  return k;
}

ImageGrid gaussian_blur(const ImageGrid& img, double sigma) {
  if (img.data.size() != img.height * img.width * img.channels) {
    throw DimensionError("gaussian_blur: image buffer size disagrees with its dimensions");
  }
  if (sigma == 0.0) return img;
  const std::vector<double> k = gaussian_kernel_1d(sigma);
  const long r = static_cast<long>(k.size() / 2);
  const std::size_t H = img.height, W = img.width, C = img.channels;
  ImageGrid tmp(H, W, C);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      for (long t = -r; t <= r; ++t) {
        const std::size_t sx = reflect_index(static_cast<long>(x) + t, W);
        const double w = k[static_cast<std::size_t>(t + r)];
        for (std::size_t c = 0; c < C; ++c) tmp.at(y, x, c) += w * img.at(y, sx, c);
      }
    }
  }
  ImageGrid out(H, W, C);
  for (std::size_t y = 0; y < H; ++y) {
    for (long t = -r; t <= r; ++t) {
      const std::size_t sy = reflect_index(static_cast<long>(y) + t, H);
      const double w = k[static_cast<std::size_t>(t + r)];
      for (std::size_t x = 0; x < W; ++x) {
        for (std::size_t c = 0; c < C; ++c) out.at(y, x, c) += w * tmp.at(sy, x, c);
      }
    }
  }
  return out;
}

PatchExtractor::PatchExtractor(const ImageGrid& img, PatchSpec spec)
    : spec_(std::move(spec)), height_(img.height), width_(img.width), channels_(img.channels) {
  spec_.validate();
  per_scale_.reserve(spec_.num_scales());
  for (std::size_t s = 0; s < spec_.num_scales(); ++s) {
    per_scale_.push_back(s == 0 ? img : gaussian_blur(img, spec_.blur_sigma[s]));
  }
}

void PatchExtractor::stack_into(PixelIndex coord, double* out) const {
  if (coord.row >= height_ || coord.col >= width_) {
    throw ContractError("extract_stack: coordinate outside the image");
  }
  const long p = static_cast<long>(spec_.patch_size);
  const long r = static_cast<long>(spec_.radius());
  for (std::size_t s = 0; s < spec_.num_scales(); ++s) {
    const long f = static_cast<long>(spec_.scales[s]);
    const ImageGrid& src = per_scale_[s];
    for (long a = 0; a < p; ++a) {
      const std::size_t y = reflect_index(static_cast<long>(coord.row) + f * (a - r), height_);
      for (long b = 0; b < p; ++b) {
        const std::size_t x = reflect_index(static_cast<long>(coord.col) + f * (b - r), width_);
        for (std::size_t c = 0; c < channels_; ++c) *out++ = src.at(y, x, c);
      }
    }
  }
}

PatchStack PatchExtractor::stack(PixelIndex coord) const {
  PatchStack st{coord, std::vector<double>(stack_size())};
  stack_into(coord, st.values.data());
  return st;
}

std::vector<double> PatchExtractor::all_stacks() const {
  const std::size_t d = stack_size();
  std::vector<double> out(height_ * width_ * d);
  for (std::size_t y = 0; y < height_; ++y) {
    for (std::size_t x = 0; x < width_; ++x) stack_into({y, x}, out.data() + (y * width_ + x) * d);
  }
  return out;
}

PatchStack extract_stack(const ImageGrid& img, PixelIndex coord, const PatchSpec& spec) {
  return PatchExtractor(img, spec).stack(coord);
}

namespace {

// Known iff every pixel of the (reflected) footprint around the tap is known.
double footprint_known(const ImageGrid& mask, long ty, long tx, long f) {
  const long half = f / 2;
  for (long dy = -half; dy <= half; ++dy) {
    const std::size_t y = reflect_index(ty + dy, mask.height);
    for (long dx = -half; dx <= half; ++dx) {
      const std::size_t x = reflect_index(tx + dx, mask.width);
      if (mask.at(y, x, 0) == 0.0) return 0.0;
    }
  }
  return 1.0;
}

void mask_stack_into(const ImageGrid& mask, PixelIndex coord, const PatchSpec& spec,
                     std::size_t channels, double* out) {
  const long p = static_cast<long>(spec.patch_size);
  const long r = static_cast<long>(spec.radius());
  for (std::size_t s = 0; s < spec.num_scales(); ++s) {
    const long f = static_cast<long>(spec.scales[s]);
    for (long a = 0; a < p; ++a) {
      const long ty = static_cast<long>(reflect_index(static_cast<long>(coord.row) + f * (a - r), mask.height));
      for (long b = 0; b < p; ++b) {
        const long tx = static_cast<long>(reflect_index(static_cast<long>(coord.col) + f * (b - r), mask.width));
        const double v = footprint_known(mask, ty, tx, f);
        for (std::size_t c = 0; c < channels; ++c) *out++ = v;
      }
    }
  }
}

void check_mask(const ImageGrid& mask) {
  if (mask.channels != 1) throw ContractError("known mask must be single-channel");
  for (double v : mask.data) {
    if (v != 0.0 && v != 1.0) throw ContractError("known mask must be binary");
  }
}

}  // namespace

MaskStack extract_mask_stack(const ImageGrid& known_mask, PixelIndex coord, const PatchSpec& spec,
                             std::size_t channels) {
  spec.validate();
  check_mask(known_mask);
  if (coord.row >= known_mask.height || coord.col >= known_mask.width) {
    throw ContractError("extract_mask_stack: coordinate outside the mask");
  }
  MaskStack st{coord, std::vector<double>(spec.elements(channels))};
  mask_stack_into(known_mask, coord, spec, channels, st.values.data());
  return st;
}

std::vector<double> all_mask_stacks(const ImageGrid& known_mask, const PatchSpec& spec,
                                    std::size_t channels) {
  spec.validate();
  check_mask(known_mask);
  const std::size_t d = spec.elements(channels);
  std::vector<double> out(known_mask.pixels() * d);
  for (std::size_t y = 0; y < known_mask.height; ++y) {
    for (std::size_t x = 0; x < known_mask.width; ++x) {
      mask_stack_into(known_mask, {y, x}, spec, channels, out.data() + (y * known_mask.width + x) * d);
    }
  }
  return out;
}

bool ShiftMap::in_bounds(PixelIndex x, const ShiftEntry& e, std::size_t height,
                         std::size_t width) const {
  const long y = static_cast<long>(x.row) + e.shift_row;
  const long c = static_cast<long>(x.col) + e.shift_col;
  return y >= 0 && c >= 0 && y < static_cast<long>(height) && c < static_cast<long>(width);
}

ShiftMap shift_map(const PatchSpec& spec) {
  spec.validate();
  ShiftMap map;
  const long p = static_cast<long>(spec.patch_size);
  const long r = static_cast<long>(spec.radius());
  for (std::size_t s = 0; s < spec.num_scales(); ++s) {
    const long f = static_cast<long>(spec.scales[s]);
    for (long a = 0; a < p; ++a) {
      for (long b = 0; b < p; ++b) {
        ShiftEntry e;
        e.scale_index = s;
        e.row_offset = a - r;
        e.col_offset = b - r;
        e.shift_row = -f * e.row_offset;
        e.shift_col = -f * e.col_offset;
        map.entries.push_back(e);
      }
    }
  }
  map.center = spec.center_spatial();
  return map;
}

}  // namespace knitwork

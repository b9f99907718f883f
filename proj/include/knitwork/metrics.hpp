#pragma once

#include <limits>
#include <optional>
#include <string>

#include "knitwork/image.hpp"

namespace knitwork {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::string region = "whole";
  // SSIM fell back to global statistics (image smaller than the window).
  bool ssim_global = false;
};

// 10 log10(1 / MSE) over all channels of the pixels selected by region_mask
// (single-channel, nonzero = selected). Identical inputs give +inf.
double psnr(const ImageGrid& a, const ImageGrid& b, const ImageGrid* region_mask = nullptr);

struct SsimResult {
  double value = 0.0;
  bool global_fallback = false;
};

// Mean local SSIM on luminance: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
// K2 = 0.03, dynamic range 1, reflect padding. region_mask selects window
// centers.
SsimResult ssim(const ImageGrid& a, const ImageGrid& b, const ImageGrid* region_mask = nullptr);

MetricReport evaluate(const ImageGrid& a, const ImageGrid& b, const ImageGrid* region_mask = nullptr,
                      std::string region_name = "whole");

// Luminance (Rec. 601 weights) for 3-channel input, copy for 1-channel input.
ImageGrid to_luminance(const ImageGrid& img);

}  // namespace knitwork

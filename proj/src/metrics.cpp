#include "knitwork/metrics.hpp"

#include <cmath>

#include "knitwork/errors.hpp"
#include "knitwork/patching.hpp"

namespace knitwork {
namespace {

void check_pair(const ImageGrid& a, const ImageGrid& b, const ImageGrid* mask, const char* what) {
  if (!a.same_shape(b)) throw DimensionError(std::string(what) + ": image shapes differ");
  if (mask && (mask->height != a.height || mask->width != a.width || mask->channels != 1)) {
    throw DimensionError(std::string(what) + ": region mask must be single-channel and image-sized");
  }
}

bool selected(const ImageGrid* mask, std::size_t r, std::size_t c) {
  return mask == nullptr || mask->at(r, c, 0) != 0.0;
}

}  // namespace

ImageGrid to_luminance(const ImageGrid& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ContractError("luminance needs 1 or 3 channels");
  ImageGrid out(img.height, img.width, 1);
  for (std::size_t r = 0; r < img.height; ++r) {
    for (std::size_t c = 0; c < img.width; ++c) {
      out.at(r, c, 0) = 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
    }
  }
  return out;
}

double psnr(const ImageGrid& a, const ImageGrid& b, const ImageGrid* region_mask) {
  check_pair(a, b, region_mask, "psnr");
  double se = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < a.height; ++r) {
    for (std::size_t c = 0; c < a.width; ++c) {
      if (!selected(region_mask, r, c)) continue;
      for (std::size_t ch = 0; ch < a.channels; ++ch) {
        const double d = a.at(r, c, ch) - b.at(r, c, ch);
        se += d * d;
        ++count;
      }
    }
  }
  if (count == 0) throw ContractError("psnr: empty region");
  const double mse = se / static_cast<double>(count);
  if (mse == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / mse);
}

namespace {

constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

double ssim_formula(double mx, double my, double vx, double vy, double cxy) {
  return ((2.0 * mx * my + kC1) * (2.0 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
}

// Window statistics of one image product, computed as E[u*v] - E[u]E[v] so the
// same expression yields variances and the covariance.
SsimResult global_ssim(const ImageGrid& x, const ImageGrid& y, const ImageGrid* mask) {
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < x.height; ++r) {
    for (std::size_t c = 0; c < x.width; ++c) {
      if (!selected(mask, r, c)) continue;
      const double u = x.at(r, c, 0), v = y.at(r, c, 0);
      sx += u;
      sy += v;
      sxx += u * u;
      syy += v * v;
      sxy += u * v;
      ++n;
    }
  }
  if (n == 0) throw ContractError("ssim: empty region");
  const double inv = 1.0 / static_cast<double>(n);
  const double mx = sx * inv, my = sy * inv;
  return {ssim_formula(mx, my, sxx * inv - mx * mx, syy * inv - my * my, sxy * inv - mx * my), true};
}

}  // namespace

SsimResult ssim(const ImageGrid& a, const ImageGrid& b, const ImageGrid* region_mask) {
  check_pair(a, b, region_mask, "ssim");
  const ImageGrid x = to_luminance(a);
  const ImageGrid y = to_luminance(b);
  constexpr std::size_t kWindow = 11;
  if (x.height < kWindow || x.width < kWindow) return global_ssim(x, y, region_mask);

  std::vector<double> w1(kWindow);
  {
    double total = 0.0;
    for (std::size_t i = 0; i < kWindow; ++i) {
      const double d = static_cast<double>(i) - 5.0;
      w1[i] = std::exp(-0.5 * d * d / (1.5 * 1.5));
      total += w1[i];
    }
    for (double& v : w1) v /= total;
  }
  const long r = 5;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t cy = 0; cy < x.height; ++cy) {
    for (std::size_t cx = 0; cx < x.width; ++cx) {
      if (!selected(region_mask, cy, cx)) continue;
      double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
      for (long dy = -r; dy <= r; ++dy) {
        const std::size_t py = reflect_index(static_cast<long>(cy) + dy, x.height);
        for (long dx = -r; dx <= r; ++dx) {
          const std::size_t px = reflect_index(static_cast<long>(cx) + dx, x.width);
          const double w = w1[static_cast<std::size_t>(dy + r)] * w1[static_cast<std::size_t>(dx + r)];
          const double u = x.at(py, px, 0), v = y.at(py, px, 0);
          mx += w * u;
          my += w * v;
          exx += w * (u * u);
          eyy += w * (v * v);
          exy += w * (u * v);
        }
      }
      acc += ssim_formula(mx, my, exx - mx * mx, eyy - my * my, exy - mx * my);
      ++count;
    }
  }
  if (count == 0) throw ContractError("ssim: empty region");
  return {acc / static_cast<double>(count), false};
}

MetricReport evaluate(const ImageGrid& a, const ImageGrid& b, const ImageGrid* region_mask,
                      std::string region_name) {
  MetricReport report;
  report.psnr_db = psnr(a, b, region_mask);
  const SsimResult s = ssim(a, b, region_mask);
  report.ssim = s.value;
  report.ssim_global = s.global_fallback;
  report.region = std::move(region_name);
  return report;
}

}  // namespace knitwork

#include "knitwork/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "knitwork/errors.hpp"

namespace knitwork {

AblationStage parse_ablation_stage(const std::string& name) {
  if (name == "mlp") return AblationStage::kMlp;
  if (name == "patch") return AblationStage::kPatch;
  if (name == "xpatch") return AblationStage::kXpatch;
  if (name == "full") return AblationStage::kFull;
  throw ConfigError("unknown ablation stage '" + name + "' (expected mlp, patch, xpatch or full)");
}

std::string ablation_stage_name(AblationStage stage) {
  switch (stage) {
    case AblationStage::kMlp: return "mlp";
    case AblationStage::kPatch: return "patch";
    case AblationStage::kXpatch: return "xpatch";
    case AblationStage::kFull: return "full";
  }
  return "full";
}

TrainConfig ablation_config(TrainConfig config, AblationStage stage) {
  config.patch_output = stage != AblationStage::kMlp;
  config.xpatch_loss = stage == AblationStage::kXpatch || stage == AblationStage::kFull;
  config.adversarial = stage == AblationStage::kFull;
  return config;
}

TrainConfig baseline_config(TrainConfig config) { return ablation_config(std::move(config), AblationStage::kMlp); }

namespace {

TaskResult finish(TrainState state, const ImageGrid* reference, const ImageGrid* region_mask) {
  TaskResult r;
  r.output = render(state);
  if (reference) {
    if (!reference->same_shape(r.output)) {
      throw DimensionError("reference image does not match the output size");
    }
    r.whole = evaluate(r.output, *reference);
    if (region_mask && std::any_of(region_mask->data.begin(), region_mask->data.end(),
                                   [](double v) { return v != 0.0; })) {
      r.region = evaluate(r.output, *reference, region_mask, "region");
    }
  }
  if (state.task.super_resolution()) r.kernel = current_kernel(state);
  r.state = std::move(state);
  return r;
}

ImageGrid invert_mask(const ImageGrid& known) {
  ImageGrid out = known;
  for (double& v : out.data) v = v == 0.0 ? 1.0 : 0.0;
  return out;
}

}  // namespace

TaskResult run_inpaint(const ImageGrid& image, const ImageGrid& known_mask, const TrainConfig& config,
                       const FitOptions& options) {
  if (known_mask.height != image.height || known_mask.width != image.width || known_mask.channels != 1) {
    throw DimensionError("known mask must be single-channel and match the image size");
  }
  if (std::none_of(known_mask.data.begin(), known_mask.data.end(), [](double v) { return v != 0.0; })) {
    throw ContractError("the hole covers the entire image");
  }
  TaskContext task;
  task.target = image;
  task.known_mask = known_mask;
  for (std::size_t p = 0; p < image.pixels(); ++p) {
    if (known_mask.data[p] == 0.0) {
      for (std::size_t c = 0; c < image.channels; ++c) task.target.data[p * image.channels + c] = 0.0;
    }
  }
  const ImageGrid region = invert_mask(known_mask);
  return finish(fit(std::move(task), config, options), &image, &region);
}

TaskResult run_inpaint(const ImageGrid& image, const InpaintSpec& spec, const TrainConfig& config,
                       const FitOptions& options) {
  return run_inpaint(image, hole_mask(image.height, image.width, spec.hole), config, options);
}

TaskResult run_superres(const ImageGrid& low_res, const SrSpec& spec, const TrainConfig& config,
                        const FitOptions& options, const ImageGrid* high_res) {
  if (spec.factor < 2) throw ContractError("super-resolution factor must be at least 2");
  TaskContext task;
  task.target = low_res;
  task.sr_factor = spec.factor;
  task.learn_kernel = spec.learned;
  task.fixed_kernel = spec.kernel;
  return finish(fit(std::move(task), config, options), high_res, nullptr);
}

ImageGrid make_noisy(const ImageGrid& clean, const DenoiseSpec& spec) {
  if (spec.noise_sigma == 0.0) return clean;
  return degrade_add_noise(clean, spec.noise_sigma, spec.noise_seed);
}

TaskResult run_denoise(const ImageGrid& noisy, const TrainConfig& config, const FitOptions& options,
                       const ImageGrid* clean) {
  TaskContext task;
  task.target = noisy;
  return finish(fit(std::move(task), config, options), clean, nullptr);
}

TaskResult run_baseline_mlp(const TaskContext& task, const TrainConfig& config, const FitOptions& options,
                            const ImageGrid* reference, const ImageGrid* region_mask) {
  TaskContext t = task;
  if (!t.known_mask.data.empty()) {
    for (std::size_t p = 0; p < t.target.pixels(); ++p) {
      if (t.known_mask.data[p] == 0.0) {
        for (std::size_t c = 0; c < t.target.channels; ++c) t.target.data[p * t.target.channels + c] = 0.0;
      }
    }
  }
  return finish(fit(std::move(t), baseline_config(config), options), reference, region_mask);
}

TaskResult run_fit(const ImageGrid& image, const TrainConfig& config, const FitOptions& options) {
  TaskContext task;
  task.target = image;
  return finish(fit(std::move(task), config, options), &image, nullptr);
}

double kernel_center_mass(const Tensor& kernel, std::size_t size) {
  if (kernel.rank() != 2 || kernel.dim(0) % 2 == 0 || kernel.dim(1) % 2 == 0) {
    throw DimensionError("kernel must be 2-D with odd sides");
  }
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1);
  const long ch = static_cast<long>(kh / 2), cw = static_cast<long>(kw / 2), r = static_cast<long>(size / 2);
  double total = 0.0, center = 0.0;
  for (std::size_t y = 0; y < kh; ++y) {
    for (std::size_t x = 0; x < kw; ++x) {
      const double a = std::abs(kernel.data()[y * kw + x]);
      total += a;
      if (std::labs(static_cast<long>(y) - ch) <= r && std::labs(static_cast<long>(x) - cw) <= r) center += a;
    }
  }
  return total > 0.0 ? center / total : 0.0;
}

double kernel_axis_ratio(const Tensor& kernel) {
  if (kernel.rank() != 2) throw DimensionError("kernel must be 2-D");
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1);
  double m = 0.0, my = 0.0, mx = 0.0;
  for (std::size_t y = 0; y < kh; ++y) {
    for (std::size_t x = 0; x < kw; ++x) {
      const double a = std::abs(kernel.data()[y * kw + x]);
      m += a;
      my += a * static_cast<double>(y);
      mx += a * static_cast<double>(x);
    }
  }
  if (m == 0.0) throw ContractError("kernel_axis_ratio: kernel is zero");
  my /= m;
  mx /= m;
  double syy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t y = 0; y < kh; ++y) {
    for (std::size_t x = 0; x < kw; ++x) {
      const double a = std::abs(kernel.data()[y * kw + x]) / m;
      const double dy = static_cast<double>(y) - my, dx = static_cast<double>(x) - mx;
      syy += a * dy * dy;
      sxx += a * dx * dx;
      sxy += a * dx * dy;
    }
  }
  const double mean = 0.5 * (syy + sxx);
  const double dev = std::sqrt(0.25 * (syy - sxx) * (syy - sxx) + sxy * sxy);
  const double lo = mean - dev, hi = mean + dev;
  if (lo <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(hi / lo);
}

void write_kernel_csv(const Tensor& kernel, const std::string& path) {
  if (kernel.rank() != 2) throw DimensionError("kernel must be 2-D");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write '" + path + "'");
  char buf[32];
  for (std::size_t y = 0; y < kernel.dim(0); ++y) {
    for (std::size_t x = 0; x < kernel.dim(1); ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", kernel.data()[y * kernel.dim(1) + x]);
      os << (x ? "," : "") << buf;
    }
    os << '\n';
  }
  if (!os) throw IoError("failed writing '" + path + "'");
}

void save_kernel_heatmap(const Tensor& kernel, const std::string& path, std::size_t cell) {
  if (kernel.rank() != 2 || cell == 0) throw DimensionError("kernel must be 2-D");
  double peak = 0.0;
  for (double v : kernel.data()) peak = std::max(peak, std::abs(v));
  ImageGrid img(kernel.dim(0) * cell, kernel.dim(1) * cell, 1);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double v = kernel.data()[(y / cell) * kernel.dim(1) + x / cell];
      img.at(y, x, 0) = peak > 0.0 ? std::abs(v) / peak : 0.0;
    }
  }
  save_png(img, path);
}

}  // namespace knitwork

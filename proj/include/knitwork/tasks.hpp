#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "knitwork/imageio.hpp"
#include "knitwork/metrics.hpp"
#include "knitwork/trainer.hpp"

namespace knitwork {

struct InpaintSpec {
  Rect hole;
};

struct SrSpec {
  std::size_t factor = 2;
  bool learned = true;
  Tensor kernel = Tensor(Shape{1, 1}, 1.0);  // used when not learned
};

struct DenoiseSpec {
  double noise_sigma = 0.0;  // 8-bit units
  std::uint64_t noise_seed = 0;
};

struct TaskResult {
  ImageGrid output;
  std::optional<MetricReport> whole;   // against the reference, when one is known
  std::optional<MetricReport> region;  // inpainted region; absent for an empty hole
  Tensor kernel;                       // super-resolution only
  TrainState state;
};

// The four Fig. 3 style columns: conventional MLP, patch output, plus
// cross-patch loss, plus adversarial loss.
enum class AblationStage { kMlp, kPatch, kXpatch, kFull };
AblationStage parse_ablation_stage(const std::string& name);
std::string ablation_stage_name(AblationStage stage);
TrainConfig ablation_config(TrainConfig config, AblationStage stage);
TrainConfig baseline_config(TrainConfig config);

// Trains on `image` outside `known_mask` (1 = known). Hole pixels are zeroed
// before training so no hidden content leaks into blurred stacks. Metrics are
// taken against `image`.
TaskResult run_inpaint(const ImageGrid& image, const ImageGrid& known_mask, const TrainConfig& config,
                       const FitOptions& options = {});
TaskResult run_inpaint(const ImageGrid& image, const InpaintSpec& spec, const TrainConfig& config,
                       const FitOptions& options = {});

// Fine-grid training against a low-res source. `high_res`, when given, is the
// reference for metrics.
TaskResult run_superres(const ImageGrid& low_res, const SrSpec& spec, const TrainConfig& config,
                        const FitOptions& options = {}, const ImageGrid* high_res = nullptr);

ImageGrid make_noisy(const ImageGrid& clean, const DenoiseSpec& spec);
// Plain fit to the noisy image; metrics against `clean` when given.
TaskResult run_denoise(const ImageGrid& noisy, const TrainConfig& config, const FitOptions& options = {},
                       const ImageGrid* clean = nullptr);

// Conventional MLP on a task. For super-resolution it trains on the fine
// pixels that coincide with low-res samples (delta kernel implied).
TaskResult run_baseline_mlp(const TaskContext& task, const TrainConfig& config, const FitOptions& options = {},
                            const ImageGrid* reference = nullptr, const ImageGrid* region_mask = nullptr);

// Plain fit of an image (unit mask).
TaskResult run_fit(const ImageGrid& image, const TrainConfig& config, const FitOptions& options = {});

// Learned-kernel diagnostics.
// Share of absolute kernel mass inside the central size x size window.
double kernel_center_mass(const Tensor& kernel, std::size_t size = 3);
// Square root of the eigenvalue ratio (major / minor) of the second-moment
// matrix of the absolute kernel weights.
double kernel_axis_ratio(const Tensor& kernel);
void write_kernel_csv(const Tensor& kernel, const std::string& path);
// Grayscale heatmap, |w| / max|w|, each tap drawn as a cell x cell block.
void save_kernel_heatmap(const Tensor& kernel, const std::string& path, std::size_t cell = 16);

}  // namespace knitwork

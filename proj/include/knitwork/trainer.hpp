#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "knitwork/adam.hpp"
#include "knitwork/encoding.hpp"
#include "knitwork/image.hpp"
#include "knitwork/losses.hpp"
#include "knitwork/nets.hpp"
#include "knitwork/patching.hpp"
#include "knitwork/random.hpp"

namespace knitwork {

struct TrainConfig {
  LossWeights weights;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  double lr_kernel = 1e-4;
  std::size_t iterations = 10000;
  std::size_t batch_size = 1024;
  std::size_t d_steps_per_g = 1;
  // Batch coordinates used as cross-patch anchors per step (0 = all). The
  // anchor sum is rescaled by batch_size / anchors.
  std::size_t xpatch_anchors = 0;
  std::uint64_t seed = 0;
  PatchSpec spec;
  std::size_t frequencies = 128;
  double sigma_pe = 10.0;
  NetWidths widths;
  // Ablation switches. patch_output off selects the conventional MLP, which
  // requires the other two off as well.
  bool patch_output = true;
  bool xpatch_loss = true;
  bool adversarial = true;
  GanForm gan_form = GanForm::kNonSaturating;
  double label_smoothing = 0.1;
  std::size_t checkpoint_every = 0;  // 0 = final checkpoint only
  std::size_t log_every = 100;
  // Super-resolution kernel network.
  std::vector<std::size_t> kernel_sizes{7, 5, 3, 1, 1};
  std::size_t kernel_channels = 64;
  bool sr_pixel_loss = false;

  // Throws ConfigError.
  void validate() const;
};

// What the trainer fits. The training grid is the target grid, or the fine
// grid (factor x target) for super-resolution.
struct TaskContext {
  ImageGrid target;      // source colors (low-res source for super-resolution)
  ImageGrid known_mask;  // single channel, 1 = known; empty means all known
  std::size_t sr_factor = 1;
  bool learn_kernel = false;
  Tensor fixed_kernel = Tensor(Shape{1, 1}, 1.0);  // known-kernel mode

  bool super_resolution() const { return sr_factor > 1; }
  std::size_t grid_height() const { return target.height * sr_factor; }
  std::size_t grid_width() const { return target.width * sr_factor; }
};

struct LossRecord {
  std::size_t step = 0;
  LossReport report;
};

struct TrainState {
  TrainConfig config;
  TaskContext task;
  FourierEncoding encoding{std::vector<double>{0.0, 0.0}};
  Mlp generator;      // Patch MLP, or the conventional MLP when patch_output is off
  Mlp reconstructor;  // unused by the conventional MLP
  Mlp discriminator;
  DeepLinearKernel kernel;  // learned super-resolution kernel
  AdamState adam_g;
  AdamState adam_d;
  AdamState adam_k;
  std::size_t step = 0;
  Rng rng;
  std::vector<LossRecord> history;

  // Ground truth per pixel of the target image, row-major.
  std::vector<double> truth_stacks;
  std::vector<double> mask_stacks;

  std::size_t channels() const { return task.target.channels; }
  std::size_t stack_dim() const { return config.spec.elements(channels()); }
  std::vector<Tensor> generator_parameters() const;
};

// Builds networks, optimizers and ground-truth stacks for a task.
TrainState init_state(TaskContext task, const TrainConfig& config);

// Uniform sample without replacement over all grid coordinates.
CoordinateBatch sample_batch(std::size_t height, std::size_t width, std::size_t batch_size, Rng& rng);

// One discriminator update; report.disc_bce is set. Skipped (with a warning on
// stderr) when no batch coordinate has a fully known stack.
LossReport discriminator_step(TrainState& state, const CoordinateBatch& batch);
// One generator update (Patch MLP, Reconstructor and learned kernel).
LossReport generator_step(TrainState& state, const CoordinateBatch& batch);

struct FitOptions {
  std::ostream* progress = nullptr;  // progress lines every log_every steps
  std::string loss_csv;              // appended per step when non-empty
  std::string checkpoint_dir;        // checkpoints written when non-empty
};

// Runs the remaining iterations (state.step .. config.iterations).
void fit(TrainState& state, const FitOptions& options = {});
TrainState fit(TaskContext task, const TrainConfig& config, const FitOptions& options = {});

// Reconstructed colors at arbitrary coordinates: N x C.
Tensor render_colors(const TrainState& state, const CoordinateBatch& coords);
// Image over an H x W grid of pixel centers in the unit square.
ImageGrid render(const TrainState& state, std::size_t height, std::size_t width);
// Image over the training grid.
ImageGrid render(const TrainState& state);
// Learned (or fixed) downsampling kernel of a super-resolution state.
Tensor current_kernel(const TrainState& state);

void write_loss_csv_header(std::ostream& os);
void write_loss_csv_row(std::ostream& os, const LossRecord& record);

void save_checkpoint(const TrainState& state, const std::string& path);
// Restores weights, optimizer moments, step and generator state into a state
// built by init_state with the same configuration.
void load_checkpoint(TrainState& state, const std::string& path);

}  // namespace knitwork

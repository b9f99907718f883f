#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "knitwork/encoding.hpp"
#include "knitwork/patching.hpp"
#include "knitwork/tensor.hpp"

namespace knitwork {

struct LossWeights {
  double alpha = 1.0;  // cross-patch consistency
  double beta = 1.0;   // reconstructed pixel
  double gamma = 0.1;  // adversarial
  double delta = 10.0; // downsampling consistency (super-resolution only)

  void validate() const;
};

struct LossReport {
  double recon = 0.0;
  double xpatch = 0.0;
  double pixel = 0.0;
  double gen_bce = 0.0;
  double disc_bce = 0.0;
  double down = 0.0;
  double total_g = 0.0;
};

// Masked patch MSE: sum_x sum_d (truth - pred)^2 * mask / D for N x D inputs.
Tensor patch_recon_loss(const Tensor& pred, const Tensor& truth, const Tensor& mask);

// Where each grid pixel's prediction lives in the prediction tensor.
struct PredictionField {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<long> row_of_pixel;  // -1 when the pixel was not evaluated

  static PredictionField full_grid(std::size_t height, std::size_t width);
  long row(std::size_t r, std::size_t c) const { return row_of_pixel[r * width + c]; }
};

// One (a, b, weight) entry per cross-patch term: element i of the stack at
// x + s against the central finest-scale element of the stack at x, for every
// anchor x, in-bounds non-zero shift s and channel. Terms whose shift is zero
// compare a stack with itself and are not generated.
std::vector<PairTerm> cross_patch_terms(const PredictionField& field,
                                        std::span<const PixelIndex> anchors, const PatchSpec& spec,
                                        std::size_t channels, double anchor_scale = 1.0);

// sum over anchors and elements of (pred(x+s)[i] - pred(x)[o])^2 weighted per
// scale. pred holds one flattened stack per row.
Tensor cross_patch_loss(const Tensor& pred, const PredictionField& field,
                        std::span<const PixelIndex> anchors, const PatchSpec& spec,
                        std::size_t channels, double anchor_scale = 1.0);

// sum |colors - target| (optionally times a same-shaped 0/1 mask).
Tensor pixel_loss(const Tensor& colors, const Tensor& target);
Tensor pixel_loss(const Tensor& colors, const Tensor& target, const Tensor& mask);

// Super-resolution consistency: squared error between the downsampled render
// and the low-res source, averaged over channels and summed over pixels (the
// same per-coordinate normalisation as the patch reconstruction loss).
Tensor downsampling_loss(const Tensor& downsampled, const Tensor& low_res);

// BCE of real scores against 1 - smoothing plus BCE of fake scores against 0,
// each averaged over its own set.
Tensor disc_loss(const Tensor& real_scores, const Tensor& fake_scores, double smoothing = 0.1);

enum class GanForm { kNonSaturating, kMinimax };
// Non-saturating: mean(-ln D(fake)). Minimax: mean(ln(1 - D(fake))).
Tensor gen_adv_loss(const Tensor& fake_scores, GanForm form = GanForm::kNonSaturating);

struct GeneratorLossParts {
  Tensor recon = Tensor::scalar(0.0);
  Tensor xpatch = Tensor::scalar(0.0);
  Tensor pixel = Tensor::scalar(0.0);
  Tensor gen_bce = Tensor::scalar(0.0);
  Tensor down = Tensor::scalar(0.0);
};

struct WeightedLoss {
  Tensor total;
  LossReport report;
};

// recon + alpha xpatch + beta pixel + gamma gen_bce (+ delta down).
WeightedLoss total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights);

}  // namespace knitwork

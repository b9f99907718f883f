#include "knitwork/losses.hpp"

#include <string>

#include "knitwork/errors.hpp"

namespace knitwork {
namespace {

void require_same(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_binary(const Tensor& mask, const char* what) {
  for (double v : mask.data()) {
    if (v != 0.0 && v != 1.0) throw ContractError(std::string(what) + ": mask must be binary");
  }
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha >= 0.0 && beta >= 0.0 && gamma >= 0.0 && delta >= 0.0)) {
    throw ConfigError("loss weights must be non-negative");
  }
}

Tensor patch_recon_loss(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
  require_same(pred, truth, "patch_recon_loss");
  require_same(pred, mask, "patch_recon_loss");
  if (pred.rank() != 2) throw DimensionError("patch_recon_loss: expected N x D stacks");
  require_binary(mask, "patch_recon_loss");
  const double per_stack = static_cast<double>(pred.dim(1));
  return scale(sum(mul(square(sub(truth, pred)), mask)), 1.0 / per_stack);
}

PredictionField PredictionField::full_grid(std::size_t height, std::size_t width) {
  PredictionField f{height, width, std::vector<long>(height * width)};
  for (std::size_t i = 0; i < height * width; ++i) f.row_of_pixel[i] = static_cast<long>(i);
  return f;
}

std::vector<PairTerm> cross_patch_terms(const PredictionField& field,
                                        std::span<const PixelIndex> anchors, const PatchSpec& spec,
                                        std::size_t channels, double anchor_scale) {
  const ShiftMap shifts = shift_map(spec);
  const std::size_t stack = spec.elements(channels);
  std::vector<PairTerm> terms;
  terms.reserve(anchors.size() * shifts.entries.size() * channels);
  for (const PixelIndex& x : anchors) {
    const long rx = field.row(x.row, x.col);
    if (rx < 0) throw ContractError("cross_patch_loss: anchor pixel has no prediction");
    for (std::size_t e = 0; e < shifts.entries.size(); ++e) {
      const ShiftEntry& entry = shifts.entries[e];
      if (entry.shift_row == 0 && entry.shift_col == 0) continue;
      if (!shifts.in_bounds(x, entry, field.height, field.width)) continue;
      const double w = spec.scale_weights[entry.scale_index] * anchor_scale;
      if (w == 0.0) continue;
      const std::size_t yr = static_cast<std::size_t>(static_cast<long>(x.row) + entry.shift_row);
      const std::size_t yc = static_cast<std::size_t>(static_cast<long>(x.col) + entry.shift_col);
      const long ry = field.row(yr, yc);
      if (ry < 0) {
        throw ContractError("cross_patch_loss: no prediction at shifted pixel (" +
                            std::to_string(yr) + ", " + std::to_string(yc) + ")");
      }
      for (std::size_t ch = 0; ch < channels; ++ch) {
        terms.push_back({static_cast<std::size_t>(ry) * stack + e * channels + ch,
                         static_cast<std::size_t>(rx) * stack + shifts.center * channels + ch, w});
      }
    }
  }
  return terms;
}

Tensor cross_patch_loss(const Tensor& pred, const PredictionField& field,
                        std::span<const PixelIndex> anchors, const PatchSpec& spec,
                        std::size_t channels, double anchor_scale) {
  if (pred.rank() != 2 || pred.dim(1) != spec.elements(channels)) {
    throw DimensionError("cross_patch_loss: predictions " + shape_string(pred.shape()) +
                         " do not hold stacks of " + std::to_string(spec.elements(channels)));
  }
  const auto terms = cross_patch_terms(field, anchors, spec, channels, anchor_scale);
  return paired_squared_difference(pred, terms);
}

Tensor pixel_loss(const Tensor& colors, const Tensor& target) {
  require_same(colors, target, "pixel_loss");
  return sum(abs(sub(colors, target)));
}

Tensor pixel_loss(const Tensor& colors, const Tensor& target, const Tensor& mask) {
  require_same(colors, target, "pixel_loss");
  require_same(colors, mask, "pixel_loss");
  require_binary(mask, "pixel_loss");
  return sum(mul(abs(sub(colors, target)), mask));
}

Tensor downsampling_loss(const Tensor& downsampled, const Tensor& low_res) {
  require_same(downsampled, low_res, "downsampling_loss");
  if (downsampled.rank() != 3) throw DimensionError("downsampling_loss: expected H x W x C images");
  return scale(sum(square(sub(downsampled, low_res))), 1.0 / static_cast<double>(downsampled.dim(2)));
}

Tensor disc_loss(const Tensor& real_scores, const Tensor& fake_scores, double smoothing) {
  if (!(smoothing >= 0.0 && smoothing < 1.0)) throw ConfigError("label smoothing must be in [0, 1)");
  return add(bce_mean(real_scores, 1.0 - smoothing), bce_mean(fake_scores, 0.0));
}

Tensor gen_adv_loss(const Tensor& fake_scores, GanForm form) {
  return form == GanForm::kNonSaturating ? bce_mean(fake_scores, 1.0)
                                         : log_one_minus_mean(fake_scores);
}

WeightedLoss total_generator_loss(const GeneratorLossParts& parts, const LossWeights& weights) {
  for (const Tensor* t : {&parts.recon, &parts.xpatch, &parts.pixel, &parts.gen_bce, &parts.down}) {
    if (t->numel() != 1) throw DimensionError("total_generator_loss: every part must be a scalar");
  }
  Tensor total = add(parts.recon, scale(parts.xpatch, weights.alpha));
  total = add(total, scale(parts.pixel, weights.beta));
  total = add(total, scale(parts.gen_bce, weights.gamma));
  total = add(total, scale(parts.down, weights.delta));
  LossReport report;
  report.recon = parts.recon.item();
  report.xpatch = parts.xpatch.item();
  report.pixel = parts.pixel.item();
  report.gen_bce = parts.gen_bce.item();
  report.down = parts.down.item();
  report.total_g = total.item();
  return {total, report};
}

}  // namespace knitwork

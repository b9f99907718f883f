#include "knitwork/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "knitwork/config.hpp"
#include "knitwork/errors.hpp"

namespace knitwork {
namespace {

Tensor gather_stacks(const std::vector<double>& stacks, std::size_t dim,
                     std::span<const PixelIndex> pixels, std::size_t width) {
  Tensor out(Shape{pixels.size(), dim});
  double* dst = out.data().data();
  for (const PixelIndex& p : pixels) {
    const double* src = stacks.data() + (p.row * width + p.col) * dim;
    dst = std::copy(src, src + dim, dst);
  }
  return out;
}

// Colors and per-channel known flags of `target` at pixels of a grid that is
// `factor` times finer.
void gather_pixels(const ImageGrid& target, const ImageGrid& known, std::span<const PixelIndex> pixels,
                   std::size_t factor, Tensor& colors, Tensor& mask) {
  const std::size_t C = target.channels;
  colors = Tensor(Shape{pixels.size(), C});
  mask = Tensor(Shape{pixels.size(), C});
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const std::size_t r = pixels[i].row / factor, c = pixels[i].col / factor;
    const double k = known.at(r, c, 0);
    for (std::size_t ch = 0; ch < C; ++ch) {
      colors.at(i * C + ch) = target.at(r, c, ch);
      mask.at(i * C + ch) = k;
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

[[noreturn]] void nan_abort(const TrainState& s, const CoordinateBatch& batch, const LossReport& r) {
  std::ostringstream os;
  os << "non-finite generator loss at step " << s.step + 1 << " (recon " << r.recon << ", xpatch "
     << r.xpatch << ", pixel " << r.pixel << ", gen_bce " << r.gen_bce << ", down " << r.down
     << "); batch of " << batch.size() << " coordinates:";
  for (const PixelIndex& p : batch.pixels) os << " (" << p.row << "," << p.col << ")";
  throw TrainingError(os.str());
}

}  // namespace

void TrainConfig::validate() const {
  weights.validate();
  spec.validate();
  if (!(lr_g > 0.0 && lr_d > 0.0 && lr_kernel > 0.0)) throw ConfigError("learning rates must be positive");
  if (iterations == 0) throw ConfigError("iterations must be at least 1");
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (frequencies == 0) throw ConfigError("frequencies must be at least 1");
  if (!(sigma_pe >= 0.0)) throw ConfigError("sigma-pe must be non-negative");
  if (widths.trunk_layers == 0 || widths.trunk_width == 0) throw ConfigError("trunk needs at least one layer of width >= 1");
  for (std::size_t w : widths.reconstructor_hidden) if (w == 0) throw ConfigError("layer widths must be positive");
  for (std::size_t w : widths.discriminator_hidden) if (w == 0) throw ConfigError("layer widths must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0)) throw ConfigError("label smoothing must be in [0, 1)");
  if (kernel_sizes.empty() || kernel_channels == 0) throw ConfigError("kernel network needs layers and channels");
  for (std::size_t k : kernel_sizes) if (k % 2 == 0) throw ConfigError("kernel layer sizes must be odd");
  if (!patch_output && (xpatch_loss || adversarial)) {
    throw ConfigError("the conventional MLP (patch output off) cannot use the cross-patch or adversarial losses");
  }
}

std::vector<Tensor> TrainState::generator_parameters() const {
  std::vector<Tensor> out = generator.parameters();
  if (config.patch_output) {
    for (const Tensor& t : reconstructor.parameters()) out.push_back(t);
  }
  return out;
}

TrainState init_state(TaskContext task, const TrainConfig& config) {
  config.validate();
  require_unit_image(task.target, "training target");
  if (task.target.pixels() == 0) throw ContractError("training target is empty");
  if (task.sr_factor == 0) throw ContractError("super-resolution factor must be positive");
  if (task.known_mask.data.empty()) {
    task.known_mask = ImageGrid(task.target.height, task.target.width, 1, 1.0);
  }
  const ImageGrid& km = task.known_mask;
  if (km.height != task.target.height || km.width != task.target.width || km.channels != 1) {
    throw DimensionError("known mask must be single-channel and match the target size");
  }
  std::size_t known = 0;
  for (double v : km.data) {
    if (v != 0.0 && v != 1.0) throw ContractError("known mask must be binary");
    known += v == 1.0;
  }
  if (known == 0) throw ContractError("the known mask covers no pixel");
  if (task.super_resolution() && !task.learn_kernel) {
    const Tensor& k = task.fixed_kernel;
    if (k.rank() != 2 || k.dim(0) % 2 == 0 || k.dim(1) % 2 == 0) {
      throw DimensionError("downsampling kernel must be 2-D with odd sides");
    }
  }
  const std::size_t grid_pixels = task.grid_height() * task.grid_width();
  if (config.batch_size > grid_pixels) {
    throw ConfigError("batch size " + std::to_string(config.batch_size) + " exceeds the " +
                      std::to_string(grid_pixels) + " grid coordinates");
  }

  TrainState s;
  s.config = config;
  s.task = std::move(task);
  Rng root(config.seed);
  s.encoding = FourierEncoding(config.frequencies, config.sigma_pe, root.next_u64());
  Rng init(root.next_u64());
  s.rng = Rng(root.next_u64());

  const std::size_t C = s.channels();
  const std::size_t D = s.stack_dim();
  const std::size_t F = s.encoding.feature_dim();
  if (config.patch_output) {
    s.generator = make_patch_mlp(F, D, config.widths, init);
    s.reconstructor = make_reconstructor(D, C, config.widths, init);
    s.discriminator = make_discriminator(D, config.widths, init);
    s.adam_d = AdamState(s.discriminator.parameters(), config.lr_d);
    PatchExtractor ex(s.task.target, config.spec);
    s.truth_stacks = ex.all_stacks();
    s.mask_stacks = all_mask_stacks(s.task.known_mask, config.spec, C);
  } else {
    s.generator = make_baseline_mlp(F, C, config.widths, init);
  }
  if (s.task.super_resolution() && s.task.learn_kernel) {
    s.kernel = DeepLinearKernel(config.kernel_sizes, config.kernel_channels, init);
    s.adam_k = AdamState(s.kernel.parameters(), config.lr_kernel);
  }
  s.adam_g = AdamState(s.generator_parameters(), config.lr_g);
  return s;
}

CoordinateBatch sample_batch(std::size_t height, std::size_t width, std::size_t batch_size, Rng& rng) {
  const std::size_t n = height * width;
  if (batch_size == 0 || batch_size > n) {
    throw ContractError("batch size " + std::to_string(batch_size) + " not in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < batch_size; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  std::vector<PixelIndex> pixels(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) pixels[i] = {idx[i] / width, idx[i] % width};
  return CoordinateBatch::from_pixels(height, width, std::move(pixels));
}

namespace {

// Batch drawn for one iteration. The conventional MLP in super-resolution
// mode trains on fine pixels (k i, k j) that coincide with low-res samples.
CoordinateBatch training_batch(TrainState& s) {
  const TaskContext& t = s.task;
  if (t.super_resolution() && !s.config.patch_output) {
    const std::size_t b = std::min(s.config.batch_size, t.target.pixels());
    CoordinateBatch lr = sample_batch(t.target.height, t.target.width, b, s.rng);
    for (PixelIndex& p : lr.pixels) p = {p.row * t.sr_factor, p.col * t.sr_factor};
    return CoordinateBatch::from_pixels(t.grid_height(), t.grid_width(), std::move(lr.pixels));
  }
  return sample_batch(t.grid_height(), t.grid_width(), s.config.batch_size, s.rng);
}

Tensor encode_pixels(const TrainState& s, std::span<const PixelIndex> pixels) {
  const std::size_t H = s.task.grid_height(), W = s.task.grid_width();
  std::vector<std::array<double, 2>> v(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    v[i] = {(static_cast<double>(pixels[i].row) + 0.5) / static_cast<double>(H),
            (static_cast<double>(pixels[i].col) + 0.5) / static_cast<double>(W)};
  }
  return s.encoding.encode(v);
}

Tensor real_stacks(TrainState& s, const CoordinateBatch& batch) {
  const std::size_t D = s.stack_dim();
  const ImageGrid& target = s.task.target;
  if (s.task.super_resolution()) {
    const std::size_t b = std::min(batch.size(), target.pixels());
    CoordinateBatch lr = sample_batch(target.height, target.width, b, s.rng);
    return gather_stacks(s.truth_stacks, D, lr.pixels, target.width);
  }
  std::vector<PixelIndex> full;
  for (const PixelIndex& p : batch.pixels) {
    const double* m = s.mask_stacks.data() + (p.row * target.width + p.col) * D;
    if (std::all_of(m, m + D, [](double v) { return v == 1.0; })) full.push_back(p);
  }
  return gather_stacks(s.truth_stacks, D, full, target.width);
}

}  // namespace

LossReport discriminator_step(TrainState& s, const CoordinateBatch& batch) {
  LossReport r;
  if (!s.config.patch_output || !s.config.adversarial) return r;
  Tensor real = real_stacks(s, batch);
  if (real.dim(0) == 0) {
    std::cerr << "warning: step " << s.step + 1
              << ": no batch coordinate has a fully known patch stack; discriminator step skipped\n";
    return r;
  }
  Tensor fake;
  {
    NoGradGuard guard;
    fake = forward_patch_mlp(encode_pixels(s, batch.pixels), s.generator);
  }
  std::vector<Tensor> params = s.discriminator.parameters();
  zero_grads(params);
  Tensor loss = disc_loss(forward_discriminator(real, s.discriminator),
                          forward_discriminator(fake, s.discriminator), s.config.label_smoothing);
  r.disc_bce = loss.item();
  if (!std::isfinite(r.disc_bce)) {
    throw TrainingError("non-finite discriminator loss at step " + std::to_string(s.step + 1));
  }
  backward(loss);
  adam_step(params, s.adam_d);
  return r;
}

namespace {

GeneratorLossParts baseline_parts(TrainState& s, const CoordinateBatch& batch) {
  GeneratorLossParts parts;
  Tensor colors = s.generator.forward(encode_pixels(s, batch.pixels));
  Tensor target, mask;
  gather_pixels(s.task.target, s.task.known_mask, batch.pixels, s.task.sr_factor, target, mask);
  parts.recon = patch_recon_loss(colors, target, mask);
  return parts;
}

GeneratorLossParts patch_parts(TrainState& s, const CoordinateBatch& batch) {
  const TrainConfig& cfg = s.config;
  const std::size_t H = s.task.grid_height(), W = s.task.grid_width();
  const std::size_t C = s.channels();
  const std::size_t B = batch.size();
  GeneratorLossParts parts;

  // Evaluation set: the batch, then the shifted neighbours of the anchors.
  const std::size_t A = cfg.xpatch_anchors == 0 ? B : std::min(cfg.xpatch_anchors, B);
  std::span<const PixelIndex> anchors(batch.pixels.data(), cfg.xpatch_loss ? A : 0);
  PredictionField field{H, W, std::vector<long>(H * W, -1)};
  std::vector<PixelIndex> eval = batch.pixels;
  for (std::size_t i = 0; i < B; ++i) field.row_of_pixel[eval[i].row * W + eval[i].col] = static_cast<long>(i);
  if (cfg.xpatch_loss) {
    const ShiftMap shifts = shift_map(cfg.spec);
    for (const PixelIndex& x : anchors) {
      for (const ShiftEntry& e : shifts.entries) {
        if ((e.shift_row == 0 && e.shift_col == 0) || !shifts.in_bounds(x, e, H, W)) continue;
        if (cfg.spec.scale_weights[e.scale_index] == 0.0) continue;
        const std::size_t yr = static_cast<std::size_t>(static_cast<long>(x.row) + e.shift_row);
        const std::size_t yc = static_cast<std::size_t>(static_cast<long>(x.col) + e.shift_col);
        long& slot = field.row_of_pixel[yr * W + yc];
        if (slot < 0) {
          slot = static_cast<long>(eval.size());
          eval.push_back({yr, yc});
        }
      }
    }
  }

  Tensor pred = forward_patch_mlp(encode_pixels(s, eval), s.generator);
  Tensor pred_b = eval.size() == B ? pred : slice_rows(pred, 0, B);

  if (!s.task.super_resolution()) {
    const std::size_t D = s.stack_dim();
    parts.recon = patch_recon_loss(pred_b, gather_stacks(s.truth_stacks, D, batch.pixels, W),
                                   gather_stacks(s.mask_stacks, D, batch.pixels, W));
  }
  if (cfg.xpatch_loss) {
    parts.xpatch = cross_patch_loss(pred, field, anchors, cfg.spec, C,
                                    static_cast<double>(B) / static_cast<double>(A));
  }
  if (!s.task.super_resolution()) {
    Tensor colors = forward_reconstructor(pred_b, s.reconstructor);
    Tensor target, mask;
    gather_pixels(s.task.target, s.task.known_mask, batch.pixels, 1, target, mask);
    parts.pixel = pixel_loss(colors, target, mask);
  }
  if (cfg.adversarial) {
    parts.gen_bce = gen_adv_loss(forward_discriminator(pred_b, s.discriminator), cfg.gan_form);
  }
  return parts;
}

GeneratorLossParts superres_parts(TrainState& s, const CoordinateBatch& batch) {
  const TrainConfig& cfg = s.config;
  const TaskContext& t = s.task;
  const std::size_t H = t.grid_height(), W = t.grid_width(), C = s.channels(), k = t.sr_factor;
  GeneratorLossParts parts;
  CoordinateBatch grid = CoordinateBatch::full_grid(H, W);
  Tensor pred = forward_patch_mlp(encode_pixels(s, grid.pixels), s.generator);
  if (cfg.xpatch_loss) {
    parts.xpatch = cross_patch_loss(pred, PredictionField::full_grid(H, W), grid.pixels, cfg.spec, C);
  }
  Tensor colors = forward_reconstructor(pred, s.reconstructor);
  Tensor image = reshape(colors, Shape{H, W, C});
  Tensor down = t.learn_kernel ? apply_kernel_downsample(image, s.kernel, k)
                               : apply_fixed_downsample(image, t.fixed_kernel, k);
  parts.down = downsampling_loss(down, t.target.to_tensor());
  std::vector<std::size_t> rows(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) rows[i] = batch.pixels[i].row * W + batch.pixels[i].col;
  if (cfg.sr_pixel_loss) {
    std::vector<PixelIndex> coarse;
    std::vector<std::size_t> coarse_rows;
    for (std::size_t r = 0; r < t.target.height; ++r) {
      for (std::size_t c = 0; c < t.target.width; ++c) {
        coarse.push_back({r * k, c * k});
        coarse_rows.push_back(r * k * W + c * k);
      }
    }
    Tensor target, mask;
    gather_pixels(t.target, t.known_mask, coarse, k, target, mask);
    parts.pixel = pixel_loss(gather_rows(colors, coarse_rows), target, mask);
  }
  if (cfg.adversarial) {
    parts.gen_bce = gen_adv_loss(forward_discriminator(gather_rows(pred, rows), s.discriminator), cfg.gan_form);
  }
  return parts;
}

}  // namespace

LossReport generator_step(TrainState& s, const CoordinateBatch& batch) {
  std::vector<Tensor> params = s.generator_parameters();
  std::vector<Tensor> kparams = s.kernel.parameters();
  zero_grads(params);
  zero_grads(kparams);
  // The discriminator only scores here; its weights collect no gradient.
  s.discriminator.set_trainable(false);
  struct Restore {
    Mlp& d;
    ~Restore() { d.set_trainable(true); }
  } restore{s.discriminator};

  GeneratorLossParts parts;
  if (!s.config.patch_output) {
    parts = baseline_parts(s, batch);
  } else if (s.task.super_resolution()) {
    parts = superres_parts(s, batch);
  } else {
    parts = patch_parts(s, batch);
  }
  WeightedLoss total = total_generator_loss(parts, s.config.weights);
  if (!std::isfinite(total.report.total_g)) nan_abort(s, batch, total.report);
  if (total.total.requires_grad()) backward(total.total);
  adam_step(params, s.adam_g);
  if (!kparams.empty()) adam_step(kparams, s.adam_k);
  return total.report;
}

void write_loss_csv_header(std::ostream& os) {
  os << "step,recon,xpatch,pixel,gen_bce,disc_bce,total_g,down\n";
}

void write_loss_csv_row(std::ostream& os, const LossRecord& rec) {
  const LossReport& r = rec.report;
  os << rec.step << ',' << fmt(r.recon) << ',' << fmt(r.xpatch) << ',' << fmt(r.pixel) << ','
     << fmt(r.gen_bce) << ',' << fmt(r.disc_bce) << ',' << fmt(r.total_g) << ',' << fmt(r.down) << '\n';
}

void fit(TrainState& s, const FitOptions& options) {
  std::ofstream csv;
  if (!options.loss_csv.empty()) {
    const bool fresh = s.step == 0 || !std::filesystem::exists(options.loss_csv);
    csv.open(options.loss_csv, fresh ? std::ios::trunc : std::ios::app);
    if (!csv) throw IoError("cannot write loss CSV '" + options.loss_csv + "'");
    if (fresh) write_loss_csv_header(csv);
  }
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig& cfg = s.config;
  while (s.step < cfg.iterations) {
    CoordinateBatch batch = training_batch(s);
    double disc = 0.0;
    for (std::size_t d = 0; d < cfg.d_steps_per_g; ++d) disc = discriminator_step(s, batch).disc_bce;
    LossReport r = generator_step(s, batch);
    r.disc_bce = disc;
    ++s.step;
    s.history.push_back({s.step, r});
    if (csv.is_open()) write_loss_csv_row(csv, s.history.back());
    if (options.progress && cfg.log_every > 0 && (s.step % cfg.log_every == 0 || s.step == cfg.iterations)) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      char line[256];
      std::snprintf(line, sizeof line,
                    "step %zu/%zu total_g %.6g recon %.6g xpatch %.6g pixel %.6g gen_bce %.6g "
                    "disc_bce %.6g down %.6g elapsed %.1fs\n",
                    s.step, cfg.iterations, r.total_g, r.recon, r.xpatch, r.pixel, r.gen_bce,
                    r.disc_bce, r.down, elapsed);
      *options.progress << line << std::flush;
    }
    if (!options.checkpoint_dir.empty() && cfg.checkpoint_every > 0 && s.step % cfg.checkpoint_every == 0 &&
        s.step < cfg.iterations) {
      save_checkpoint(s, (std::filesystem::path(options.checkpoint_dir) /
                          ("checkpoint_" + std::to_string(s.step) + ".nkwk")).string());
    }
  }
  if (csv.is_open()) {
    csv.flush();
    if (!csv) throw IoError("failed writing loss CSV '" + options.loss_csv + "'");
  }
  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(s, (std::filesystem::path(options.checkpoint_dir) / "checkpoint_final.nkwk").string());
  }
}

TrainState fit(TaskContext task, const TrainConfig& config, const FitOptions& options) {
  TrainState s = init_state(std::move(task), config);
  fit(s, options);
  return s;
}

Tensor render_colors(const TrainState& s, const CoordinateBatch& coords) {
  NoGradGuard guard;
  const std::size_t C = s.channels();
  const std::size_t n = coords.size();
  Tensor out(Shape{n, C});
  constexpr std::size_t kChunk = 2048;
  const double mr = 1.0 / static_cast<double>(std::max<std::size_t>(coords.grid_height, 1));
  const double mc = 1.0 / static_cast<double>(std::max<std::size_t>(coords.grid_width, 1));
  for (std::size_t b = 0; b < n; b += kChunk) {
    const std::size_t e = std::min(n, b + kChunk);
    Tensor feats = s.encoding.encode(std::span(coords.normalized).subspan(b, e - b), mr, mc);
    Tensor colors = s.config.patch_output ? s.reconstructor.forward(s.generator.forward(feats))
                                          : s.generator.forward(feats);
    std::copy(colors.data().begin(), colors.data().end(), out.data().begin() + b * C);
  }
  return out;
}

ImageGrid render(const TrainState& s, std::size_t height, std::size_t width) {
  Tensor colors = render_colors(s, CoordinateBatch::full_grid(height, width));
  ImageGrid img(height, width, s.channels());
  std::copy(colors.data().begin(), colors.data().end(), img.data.begin());
  clamp_unit(img);
  return img;
}

ImageGrid render(const TrainState& s) { return render(s, s.task.grid_height(), s.task.grid_width()); }

Tensor current_kernel(const TrainState& s) {
  NoGradGuard guard;
  if (s.task.learn_kernel) return s.kernel.collapse().detach();
  return s.task.fixed_kernel.clone();
}

// ---- checkpoints ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'N', 'K', 'W', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw IoError("truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& is) {
  const std::uint32_t n = get_u32(is);
  if (n > (1u << 24)) throw IoError("corrupt checkpoint string");
  std::string s(n, '\0');
  if (!is.read(s.data(), n)) throw IoError("truncated checkpoint");
  return s;
}

struct Entry {
  Shape shape;
  std::vector<double> data;
};

// Every persistent array of a state, by name. Vectors are exposed as rank-1.
std::vector<std::pair<std::string, Tensor>> named_tensors(const TrainState& s) {
  std::vector<std::pair<std::string, Tensor>> out;
  auto add_mlp = [&](const std::string& prefix, const Mlp& net) {
    const auto& layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      out.emplace_back(prefix + "." + std::to_string(i) + ".weight", layers[i].weight);
      out.emplace_back(prefix + "." + std::to_string(i) + ".bias", layers[i].bias);
    }
  };
  add_mlp("generator", s.generator);
  if (s.config.patch_output) {
    add_mlp("reconstructor", s.reconstructor);
    add_mlp("discriminator", s.discriminator);
  }
  for (std::size_t l = 0; l < s.kernel.layers().size(); ++l) {
    out.emplace_back("kernel." + std::to_string(l), s.kernel.layers()[l]);
  }
  return out;
}

std::vector<std::pair<std::string, const std::vector<double>*>> named_moments(const TrainState& s) {
  return {{"adam_g.m", &s.adam_g.first_moment}, {"adam_g.v", &s.adam_g.second_moment},
          {"adam_d.m", &s.adam_d.first_moment}, {"adam_d.v", &s.adam_d.second_moment},
          {"adam_k.m", &s.adam_k.first_moment}, {"adam_k.v", &s.adam_k.second_moment},
          {"encoding.projection", &s.encoding.projection()}};
}

void put_array(std::ostream& os, const std::string& name, const Shape& shape, std::span<const double> data) {
  put_string(os, name);
  put_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) put_u64(os, d);
  for (double v : data) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
  }
}

}  // namespace

void save_checkpoint(const TrainState& s, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint '" + path + "'");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u64(os, config_digest(s.config));
  const auto tensors = named_tensors(s);
  const auto moments = named_moments(s);
  put_u32(os, static_cast<std::uint32_t>(tensors.size() + moments.size()));
  for (const auto& [name, t] : tensors) put_array(os, name, t.shape(), t.data());
  for (const auto& [name, v] : moments) put_array(os, name, Shape{v->size()}, *v);
  const std::map<std::string, std::string> extras = {
      {"step", std::to_string(s.step)},
      {"adam_g.t", std::to_string(s.adam_g.step_count)},
      {"adam_d.t", std::to_string(s.adam_d.step_count)},
      {"adam_k.t", std::to_string(s.adam_k.step_count)},
      {"rng", s.rng.serialize()},
  };
  put_u32(os, static_cast<std::uint32_t>(extras.size()));
  for (const auto& [k, v] : extras) {
    put_string(os, k);
    put_string(os, v);
  }
  os.flush();
  if (!os) throw IoError("failed writing checkpoint '" + path + "'");
}

void load_checkpoint(TrainState& s, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint '" + path + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("'" + path + "' is not a checkpoint");
  }
  const std::uint32_t version = get_u32(is);
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  if (get_u64(is) != config_digest(s.config)) {
    throw IoError("checkpoint '" + path + "' was written with a different configuration");
  }
  std::map<std::string, Entry> entries;
  const std::uint32_t count = get_u32(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const std::string name = get_string(is);
    const std::uint32_t rank = get_u32(is);
    if (rank > 8) throw IoError("corrupt checkpoint entry '" + name + "'");
    for (std::uint32_t r = 0; r < rank; ++r) e.shape.push_back(get_u64(is));
    const std::size_t n = shape_numel(e.shape);
    if (n > (std::size_t{1} << 32)) throw IoError("corrupt checkpoint entry '" + name + "'");
    e.data.resize(n);
    for (double& v : e.data) {
      const std::uint64_t bits = get_u64(is);
      std::memcpy(&v, &bits, 8);
    }
    entries[name] = std::move(e);
  }
  std::map<std::string, std::string> extras;
  const std::uint32_t n_extra = get_u32(is);
  for (std::uint32_t i = 0; i < n_extra; ++i) {
    std::string k = get_string(is);
    extras[k] = get_string(is);
  }

  auto take = [&](const std::string& name, const Shape& shape) -> const std::vector<double>& {
    auto it = entries.find(name);
    if (it == entries.end()) throw IoError("checkpoint lacks '" + name + "'");
    if (it->second.shape != shape) {
      throw IoError("checkpoint entry '" + name + "' has shape " + shape_string(it->second.shape) +
                    ", expected " + shape_string(shape));
    }
    return it->second.data;
  };
  for (auto& [name, t] : named_tensors(s)) {
    const auto& data = take(name, t.shape());
    Tensor handle = t;
    std::copy(data.begin(), data.end(), handle.data().begin());
  }
  s.adam_g.first_moment = take("adam_g.m", Shape{s.adam_g.first_moment.size()});
  s.adam_g.second_moment = take("adam_g.v", Shape{s.adam_g.second_moment.size()});
  s.adam_d.first_moment = take("adam_d.m", Shape{s.adam_d.first_moment.size()});
  s.adam_d.second_moment = take("adam_d.v", Shape{s.adam_d.second_moment.size()});
  s.adam_k.first_moment = take("adam_k.m", Shape{s.adam_k.first_moment.size()});
  s.adam_k.second_moment = take("adam_k.v", Shape{s.adam_k.second_moment.size()});
  s.encoding = FourierEncoding(take("encoding.projection", Shape{s.encoding.projection().size()}));
  auto extra = [&](const std::string& k) {
    auto it = extras.find(k);
    if (it == extras.end()) throw IoError("checkpoint lacks '" + k + "'");
    return it->second;
  };
  try {
    s.step = std::stoull(extra("step"));
    s.adam_g.step_count = std::stoull(extra("adam_g.t"));
    s.adam_d.step_count = std::stoull(extra("adam_d.t"));
    s.adam_k.step_count = std::stoull(extra("adam_k.t"));
  } catch (const std::logic_error&) {
    throw IoError("corrupt step counters in checkpoint '" + path + "'");
  }
  s.rng.deserialize(extra("rng"));
  s.history.clear();
}

}  // namespace knitwork

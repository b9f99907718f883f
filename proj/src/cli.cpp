#include "knitwork/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "knitwork/config.hpp"
#include "knitwork/errors.hpp"
#include "knitwork/imageio.hpp"
#include "knitwork/metrics.hpp"
#include "knitwork/tasks.hpp"

namespace knitwork {
namespace {

namespace fs = std::filesystem;

// Flags shared by the training subcommands. Every config key is also a flag.
struct Common {
  std::string config_file;
  std::string out_dir = "run";
  bool baseline = false;
  bool quiet = false;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_file, "Flat 'key = value' config file (flags override it)");
  sub->add_option("--out-dir", c.out_dir, "Run directory")->capture_default_str();
  sub->add_flag("--baseline", c.baseline, "Use the conventional coordinate MLP");
  sub->add_flag("--quiet", c.quiet, "Suppress progress lines");
  for (const auto& [key, value] : config_entries(TrainConfig{})) {
    c.options[key] = sub->add_option("--" + key, c.values[key], "default: " + value);
  }
}

TrainConfig resolve_config(const Common& c) {
  Settings s;
  if (!c.config_file.empty()) s = read_settings_file(c.config_file);
  for (const auto& [key, opt] : c.options) {
    if (opt->count() > 0) s[key] = c.values.at(key);
  }
  TrainConfig cfg;
  apply_settings(cfg, s);
  if (c.baseline) cfg = baseline_config(cfg);
  cfg.validate();
  return cfg;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string metric_line(const std::string& name, const MetricReport& m) {
  return name + " psnr_db=" + number(m.psnr_db) + " ssim=" + number(m.ssim) +
         (m.ssim_global ? " ssim_window=global" : "");
}

class Run {
 public:
  Run(const Common& c, std::string subcommand, std::string command_line, std::ostream& out)
      : common_(c), subcommand_(std::move(subcommand)), command_line_(std::move(command_line)), out_(out) {
    config = resolve_config(c);
    dir_ = c.out_dir;
    fs::create_directories(dir_);
  }

  void add_input(const std::string& role, const std::string& path) {
    inputs_.emplace_back(role, path + " fnv1a64=" + hex64(file_digest(path)));
  }
  void add_task(const std::string& key, const std::string& value) { task_.emplace_back(key, value); }

  // Written before training starts. The body is a valid config file.
  void write_manifest() {
    std::ofstream os(path("manifest.txt"));
    if (!os) throw IoError("cannot write manifest in '" + dir_.string() + "'");
    os << "# knitwork run manifest; pass it to --config to rerun with the same settings\n"
       << "# tool = knitwork " << kToolVersion << '\n'
       << "# subcommand = " << subcommand_ << '\n'
       << "# command = " << command_line_ << '\n'
       << "# started = " << utc_now() << '\n';
    for (const auto& [k, v] : inputs_) os << "# input." << k << " = " << v << '\n';
    for (const auto& [k, v] : task_) os << "# task." << k << " = " << v << '\n';
    os << config_text(config);
    if (!os) throw IoError("failed writing manifest");
  }

  FitOptions fit_options() {
    FitOptions o;
    o.progress = common_.quiet ? nullptr : &out_;
    o.loss_csv = path("loss.csv");
    o.checkpoint_dir = dir_.string();
    return o;
  }

  void report(const std::string& line) {
    out_ << line << '\n';
    metrics_.push_back(line);
  }

  void finish(const ImageGrid& output) {
    save_png(output, path("output.png"));
    if (!metrics_.empty()) {
      std::ofstream os(path("metrics.txt"));
      for (const auto& l : metrics_) os << l << '\n';
    }
    std::ofstream manifest(path("manifest.txt"), std::ios::app);
    manifest << "# finished = " << utc_now() << '\n';
    out_ << "wrote " << path("output.png") << '\n';
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  TrainConfig config;

 private:
  const Common& common_;
  std::string subcommand_;
  std::string command_line_;
  std::ostream& out_;
  fs::path dir_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> task_;
  std::vector<std::string> metrics_;
};

Rect parse_hole(const std::string& text, const ImageGrid& img) {
  const auto v = parse_size_list(text, "hole");
  if (v.size() != 4) throw ConfigError("--hole expects r,c,h,w");
  Rect r{v[0], v[1], v[2], v[3]};
  if (r.row + r.height > img.height || r.col + r.width > img.width) {
    throw ConfigError("--hole " + text + " exceeds the " + std::to_string(img.height) + "x" +
                      std::to_string(img.width) + " image");
  }
  if (r.area() == img.pixels()) throw ConfigError("--hole covers the entire image");
  return r;
}

// Known mask from --hole or --mask; nullopt when neither is given.
std::optional<ImageGrid> resolve_mask(const std::string& hole, const std::string& mask_path, const ImageGrid& img,
                                      Run& run) {
  if (!hole.empty() && !mask_path.empty()) throw ConfigError("--hole and --mask are mutually exclusive");
  if (!hole.empty()) {
    const Rect r = parse_hole(hole, img);
    run.add_task("hole", hole);
    return hole_mask(img.height, img.width, r);
  }
  if (!mask_path.empty()) {
    ImageGrid m = load_mask_png(mask_path);
    if (m.height != img.height || m.width != img.width) throw ConfigError("--mask size differs from the image");
    run.add_input("mask", mask_path);
    return m;
  }
  return std::nullopt;
}

void report_result(Run& run, const TaskResult& r) {
  if (r.whole) run.report(metric_line("whole", *r.whole));
  if (r.region) run.report(metric_line("region", *r.region));
}

void save_masked(Run& run, const ImageGrid& img, const ImageGrid& known) {
  ImageGrid shown = img;
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    if (known.data[p] == 0.0) {
      for (std::size_t c = 0; c < img.channels; ++c) shown.data[p * img.channels + c] = 0.0;
    }
  }
  save_png(shown, run.path("input_masked.png"));
}

std::string join_args(int argc, const char* const* argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural Knitwork: coordinate MLP with multi-scale patch outputs", "knitwork"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("knitwork ") + kToolVersion);

  std::string image, hole, mask, kernel = "learned", ref, out_png, region, stage;
  std::size_t factor = 2;
  double sigma = 0.0;
  std::uint64_t noise_seed = 0;

  Common fit_c, inpaint_c, sr_c, denoise_c, ablate_c;
  auto* fit_cmd = app.add_subcommand("fit", "Fit an image");
  fit_cmd->add_option("image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  add_common(fit_cmd, fit_c);

  auto* inpaint_cmd = app.add_subcommand("inpaint", "Fill a rectangular hole or masked region");
  inpaint_cmd->add_option("image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  inpaint_cmd->add_option("--hole", hole, "Hole rectangle r,c,h,w");
  inpaint_cmd->add_option("--mask", mask, "Mask PNG (nonzero = known)")->check(CLI::ExistingFile);
  add_common(inpaint_cmd, inpaint_c);

  auto* sr_cmd = app.add_subcommand("superres", "Super-resolve a low-res image");
  sr_cmd->add_option("image", image, "Low-res PNG")->required()->check(CLI::ExistingFile);
  sr_cmd->add_option("--factor", factor, "Upscaling factor")->capture_default_str();
  sr_cmd->add_option("--kernel", kernel, "delta | round-gauss | diag-gauss | learned")->capture_default_str();
  sr_cmd->add_option("--ref", ref, "High-res reference for metrics")->check(CLI::ExistingFile);
  add_common(sr_cmd, sr_c);

  auto* denoise_cmd = app.add_subcommand("denoise", "Denoise; with --sigma > 0 the input is the clean reference");
  denoise_cmd->add_option("image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  denoise_cmd->add_option("--sigma", sigma, "Synthetic noise sigma in 8-bit units")->capture_default_str();
  denoise_cmd->add_option("--noise-seed", noise_seed, "Seed of the synthetic noise")->capture_default_str();
  denoise_cmd->add_option("--ref", ref, "Clean reference for metrics when --sigma is 0")->check(CLI::ExistingFile);
  add_common(denoise_cmd, denoise_c);

  auto* eval_cmd = app.add_subcommand("eval", "PSNR and SSIM of an output against a reference");
  eval_cmd->add_option("--ref", ref, "Reference PNG")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", out_png, "Output PNG")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--region", region, "Region mask PNG (nonzero = evaluated)")->check(CLI::ExistingFile);

  auto* ablate_cmd = app.add_subcommand("ablate", "One ablation column: mlp | patch | xpatch | full");
  ablate_cmd->add_option("image", image, "Input PNG")->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--stage", stage, "mlp | patch | xpatch | full")->required();
  ablate_cmd->add_option("--hole", hole, "Hole rectangle r,c,h,w");
  ablate_cmd->add_option("--mask", mask, "Mask PNG (nonzero = known)")->check(CLI::ExistingFile);
  add_common(ablate_cmd, ablate_c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  const std::string command_line = join_args(argc, argv);
  try {
    if (*eval_cmd) {
      const ImageGrid a = load_png(out_png);
      const ImageGrid b = load_png(ref);
      if (!a.same_shape(b)) throw ConfigError("--out and --ref differ in size or channels");
      out << metric_line("whole", evaluate(a, b)) << '\n';
      if (!region.empty()) {
        const ImageGrid m = load_mask_png(region);
        if (m.height != a.height || m.width != a.width) throw ConfigError("--region size differs from the images");
        out << metric_line("region", evaluate(a, b, &m, "region")) << '\n';
      }
      return kExitOk;
    }

    const ImageGrid input = load_png(image);
    if (*fit_cmd) {
      Run run(fit_c, "fit", command_line, out);
      run.add_input("image", image);
      run.write_manifest();
      TaskResult r = run_fit(input, run.config, run.fit_options());
      report_result(run, r);
      run.finish(r.output);
    } else if (*inpaint_cmd) {
      Run run(inpaint_c, "inpaint", command_line, out);
      run.add_input("image", image);
      auto known = resolve_mask(hole, mask, input, run);
      if (!known) throw ConfigError("inpaint needs --hole or --mask");
      run.write_manifest();
      save_masked(run, input, *known);
      TaskResult r = run_inpaint(input, *known, run.config, run.fit_options());
      report_result(run, r);
      run.finish(r.output);
    } else if (*ablate_cmd) {
      const AblationStage st = parse_ablation_stage(stage);
      Run run(ablate_c, "ablate", command_line, out);
      run.config = ablation_config(run.config, st);
      run.config.validate();
      run.add_input("image", image);
      run.add_task("stage", ablation_stage_name(st));
      auto known = resolve_mask(hole, mask, input, run);
      run.write_manifest();
      TaskResult r;
      if (known) {
        save_masked(run, input, *known);
        r = run_inpaint(input, *known, run.config, run.fit_options());
      } else {
        r = run_fit(input, run.config, run.fit_options());
      }
      report_result(run, r);
      run.finish(r.output);
    } else if (*sr_cmd) {
      if (factor < 2) throw ConfigError("--factor must be at least 2");
      SrSpec spec;
      spec.factor = factor;
      spec.learned = kernel == "learned";
      if (!spec.learned) spec.kernel = make_downsampling_kernel(parse_kernel_kind(kernel), factor);
      Run run(sr_c, "superres", command_line, out);
      run.add_input("image", image);
      run.add_task("factor", std::to_string(factor));
      run.add_task("kernel", kernel);
      std::optional<ImageGrid> hr;
      if (!ref.empty()) {
        hr = load_png(ref);
        if (hr->height != input.height * factor || hr->width != input.width * factor ||
            hr->channels != input.channels) {
          throw ConfigError("--ref must be the input size times --factor");
        }
        run.add_input("ref", ref);
      }
      run.write_manifest();
      TaskResult r = run.config.patch_output
                         ? run_superres(input, spec, run.config, run.fit_options(), hr ? &*hr : nullptr)
                         : run_baseline_mlp(TaskContext{input, {}, factor, spec.learned, spec.kernel}, run.config,
                                            run.fit_options(), hr ? &*hr : nullptr);
      report_result(run, r);
      if (r.kernel.numel() > 0) {
        write_kernel_csv(r.kernel, run.path("kernel.csv"));
        save_kernel_heatmap(r.kernel, run.path("kernel.png"));
      }
      run.finish(r.output);
    } else if (*denoise_cmd) {
      if (!(sigma >= 0.0)) throw ConfigError("--sigma must be non-negative");
      if (sigma > 0.0 && !ref.empty()) throw ConfigError("--ref applies only with --sigma 0");
      Run run(denoise_c, "denoise", command_line, out);
      run.add_input("image", image);
      run.add_task("sigma", number(sigma));
      run.add_task("noise-seed", std::to_string(noise_seed));
      std::optional<ImageGrid> clean;
      if (sigma > 0.0) {
        clean = input;
      } else if (!ref.empty()) {
        clean = load_png(ref);
        if (!clean->same_shape(input)) throw ConfigError("--ref differs from the input in size or channels");
        run.add_input("ref", ref);
      }
      run.write_manifest();
      const ImageGrid noisy = make_noisy(input, DenoiseSpec{sigma, noise_seed});
      if (sigma > 0.0) {
        save_png(noisy, run.path("input_noisy.png"));
        run.report(metric_line("noisy", evaluate(noisy, *clean)));
      }
      TaskResult r = run_denoise(noisy, run.config, run.fit_options(), clean ? &*clean : nullptr);
      report_result(run, r);
      run.finish(r.output);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    err << "Run with --help for more information.\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace knitwork

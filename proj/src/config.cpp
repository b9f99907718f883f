#include "knitwork/config.hpp"

#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <type_traits>

#include "knitwork/errors.hpp"
#include "knitwork/imageio.hpp"

namespace knitwork {
namespace {

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t parse_size(const std::string& text, const std::string& key) {
  std::size_t v = 0;
  const std::string t = trim(text);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

double parse_double(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

bool parse_bool(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t == "true" || t == "on" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "off" || t == "0" || t == "no") return false;
  throw ConfigError("'" + key + "' expects on/off, got '" + text + "'");
}

using Setter = std::function<void(TrainConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"alpha", [](TrainConfig& c, auto& k, auto& v) { c.weights.alpha = parse_double(v, k); }},
      {"beta", [](TrainConfig& c, auto& k, auto& v) { c.weights.beta = parse_double(v, k); }},
      {"gamma", [](TrainConfig& c, auto& k, auto& v) { c.weights.gamma = parse_double(v, k); }},
      {"delta", [](TrainConfig& c, auto& k, auto& v) { c.weights.delta = parse_double(v, k); }},
      {"lr-g", [](TrainConfig& c, auto& k, auto& v) { c.lr_g = parse_double(v, k); }},
      {"lr-d", [](TrainConfig& c, auto& k, auto& v) { c.lr_d = parse_double(v, k); }},
      {"lr-kernel", [](TrainConfig& c, auto& k, auto& v) { c.lr_kernel = parse_double(v, k); }},
      {"iters", [](TrainConfig& c, auto& k, auto& v) { c.iterations = parse_size(v, k); }},
      {"batch-size", [](TrainConfig& c, auto& k, auto& v) { c.batch_size = parse_size(v, k); }},
      {"d-steps", [](TrainConfig& c, auto& k, auto& v) { c.d_steps_per_g = parse_size(v, k); }},
      {"xpatch-anchors", [](TrainConfig& c, auto& k, auto& v) { c.xpatch_anchors = parse_size(v, k); }},
      {"seed", [](TrainConfig& c, auto& k, auto& v) { c.seed = parse_size(v, k); }},
      {"patch-size", [](TrainConfig& c, auto& k, auto& v) { c.spec.patch_size = parse_size(v, k); }},
      {"scales",
       [](TrainConfig& c, auto& k, auto& v) {
         c.spec = PatchSpec::with_scales(parse_size_list(v, k), c.spec.patch_size);
       }},
      {"blur-sigmas", [](TrainConfig& c, auto& k, auto& v) { c.spec.blur_sigma = parse_double_list(v, k); }},
      {"scale-weights", [](TrainConfig& c, auto& k, auto& v) { c.spec.scale_weights = parse_double_list(v, k); }},
      {"frequencies", [](TrainConfig& c, auto& k, auto& v) { c.frequencies = parse_size(v, k); }},
      {"sigma-pe", [](TrainConfig& c, auto& k, auto& v) { c.sigma_pe = parse_double(v, k); }},
      {"trunk-width", [](TrainConfig& c, auto& k, auto& v) { c.widths.trunk_width = parse_size(v, k); }},
      {"trunk-layers", [](TrainConfig& c, auto& k, auto& v) { c.widths.trunk_layers = parse_size(v, k); }},
      {"recon-hidden", [](TrainConfig& c, auto& k, auto& v) { c.widths.reconstructor_hidden = parse_size_list(v, k); }},
      {"disc-hidden", [](TrainConfig& c, auto& k, auto& v) { c.widths.discriminator_hidden = parse_size_list(v, k); }},
      {"disc-slope", [](TrainConfig& c, auto& k, auto& v) { c.widths.discriminator_slope = parse_double(v, k); }},
      {"patch-output", [](TrainConfig& c, auto& k, auto& v) { c.patch_output = parse_bool(v, k); }},
      {"xpatch", [](TrainConfig& c, auto& k, auto& v) { c.xpatch_loss = parse_bool(v, k); }},
      {"adversarial", [](TrainConfig& c, auto& k, auto& v) { c.adversarial = parse_bool(v, k); }},
      {"gan-form",
       [](TrainConfig& c, auto& k, auto& v) {
         const std::string t = trim(v);
         if (t == "nonsat") {
           c.gan_form = GanForm::kNonSaturating;
         } else if (t == "minimax") {
           c.gan_form = GanForm::kMinimax;
         } else {
           throw ConfigError("'" + k + "' expects nonsat or minimax, got '" + v + "'");
         }
       }},
      {"label-smoothing", [](TrainConfig& c, auto& k, auto& v) { c.label_smoothing = parse_double(v, k); }},
      {"checkpoint-every", [](TrainConfig& c, auto& k, auto& v) { c.checkpoint_every = parse_size(v, k); }},
      {"log-every", [](TrainConfig& c, auto& k, auto& v) { c.log_every = parse_size(v, k); }},
      {"kernel-sizes", [](TrainConfig& c, auto& k, auto& v) { c.kernel_sizes = parse_size_list(v, k); }},
      {"kernel-channels", [](TrainConfig& c, auto& k, auto& v) { c.kernel_channels = parse_size(v, k); }},
      {"sr-pixel-loss", [](TrainConfig& c, auto& k, auto& v) { c.sr_pixel_loss = parse_bool(v, k); }},
  };
  return table;
}

}  // namespace

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& key) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_size(item, key));
  if (out.empty()) throw ConfigError("'" + key + "' expects a comma-separated list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, key));
  if (out.empty()) throw ConfigError("'" + key + "' expects a comma-separated list");
  return out;
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& c) {
  auto b = [](bool v) { return std::string(v ? "on" : "off"); };
  return {
      {"alpha", fmt_double(c.weights.alpha)},
      {"beta", fmt_double(c.weights.beta)},
      {"gamma", fmt_double(c.weights.gamma)},
      {"delta", fmt_double(c.weights.delta)},
      {"lr-g", fmt_double(c.lr_g)},
      {"lr-d", fmt_double(c.lr_d)},
      {"lr-kernel", fmt_double(c.lr_kernel)},
      {"iters", std::to_string(c.iterations)},
      {"batch-size", std::to_string(c.batch_size)},
      {"d-steps", std::to_string(c.d_steps_per_g)},
      {"xpatch-anchors", std::to_string(c.xpatch_anchors)},
      {"seed", std::to_string(c.seed)},
      {"patch-size", std::to_string(c.spec.patch_size)},
      {"scales", join(c.spec.scales)},
      {"blur-sigmas", join(c.spec.blur_sigma)},
      {"scale-weights", join(c.spec.scale_weights)},
      {"frequencies", std::to_string(c.frequencies)},
      {"sigma-pe", fmt_double(c.sigma_pe)},
      {"trunk-width", std::to_string(c.widths.trunk_width)},
      {"trunk-layers", std::to_string(c.widths.trunk_layers)},
      {"recon-hidden", join(c.widths.reconstructor_hidden)},
      {"disc-hidden", join(c.widths.discriminator_hidden)},
      {"disc-slope", fmt_double(c.widths.discriminator_slope)},
      {"patch-output", b(c.patch_output)},
      {"xpatch", b(c.xpatch_loss)},
      {"adversarial", b(c.adversarial)},
      {"gan-form", c.gan_form == GanForm::kNonSaturating ? "nonsat" : "minimax"},
      {"label-smoothing", fmt_double(c.label_smoothing)},
      {"checkpoint-every", std::to_string(c.checkpoint_every)},
      {"log-every", std::to_string(c.log_every)},
      {"kernel-sizes", join(c.kernel_sizes)},
      {"kernel-channels", std::to_string(c.kernel_channels)},
      {"sr-pixel-loss", b(c.sr_pixel_loss)},
  };
}

std::string config_text(const TrainConfig& config) {
  std::string out;
  for (const auto& [k, v] : config_entries(config)) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t config_digest(const TrainConfig& config) {
  // Iteration count, cadence and logging do not change the trained weights of
  // a given step, so resuming with a larger budget stays compatible.
  TrainConfig c = config;
  c.iterations = 0;
  c.checkpoint_every = 0;
  c.log_every = 0;
  return fnv1a64(config_text(c));
}

bool is_config_key(const std::string& key) { return setters().count(key) != 0; }

void apply_settings(TrainConfig& config, const Settings& settings) {
  for (const auto& [k, v] : settings) {
    if (!is_config_key(k)) throw ConfigError("unknown setting '" + k + "'");
  }
  for (const char* first : {"patch-size", "scales"}) {
    if (auto it = settings.find(first); it != settings.end()) setters().at(first)(config, it->first, it->second);
  }
  for (const auto& [k, v] : settings) {
    if (k == "patch-size" || k == "scales") continue;
    setters().at(k)(config, k, v);
  }
}

Settings parse_settings(const std::string& text, const std::string& origin) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

Settings read_settings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_settings(ss.str(), path);
}

}  // namespace knitwork

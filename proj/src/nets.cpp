#include "knitwork/nets.hpp"

#include <cmath>

#include "knitwork/errors.hpp"

namespace knitwork {
namespace {

LinearLayer make_layer(std::size_t in, std::size_t out, double gain, Rng& rng) {
  // Uniform fan-in scaling: bound = gain * sqrt(3 / fan_in).
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(in));
  LinearLayer layer{Tensor(Shape{in, out}, 0.0, true), Tensor(Shape{out}, 0.0, true)};
  for (double& w : layer.weight.data()) w = rng.uniform(-bound, bound);
  return layer;
}

void check_input(const Tensor& x, const Mlp& net, const char* what) {
  if (x.rank() != 2 || x.dim(1) != net.input_dim()) {
    throw DimensionError(std::string(what) + ": input " + shape_string(x.shape()) +
                         " does not match network input width " + std::to_string(net.input_dim()));
  }
}

}  // namespace

Mlp::Mlp(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t output_dim,
         Activation activation, double leaky_slope, bool sigmoid_output, Rng& rng)
    : activation_(activation), leaky_slope_(leaky_slope), sigmoid_output_(sigmoid_output) {
  const double hidden_gain = activation == Activation::kRelu
                                 ? std::sqrt(2.0)
                                 : std::sqrt(2.0 / (1.0 + leaky_slope * leaky_slope));
  std::size_t in = input_dim;
  for (std::size_t width : hidden) {
    layers_.push_back(make_layer(in, width, hidden_gain, rng));
    in = width;
  }
  layers_.push_back(make_layer(in, output_dim, 1.0, rng));
}

Tensor Mlp::forward(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = linear(h, layers_[i].weight, layers_[i].bias);
    if (i + 1 < layers_.size()) {
      h = activation_ == Activation::kRelu ? relu(h) : leaky_relu(h, leaky_slope_);
    }
  }
  return sigmoid_output_ ? sigmoid(h) : h;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.numel() + l.bias.numel();
  return n;
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

void Mlp::set_trainable(bool on) {
  for (auto& l : layers_) {
    l.weight.set_requires_grad(on);
    l.bias.set_requires_grad(on);
  }
}

Mlp make_patch_mlp(std::size_t feature_dim, std::size_t stack_dim, const NetWidths& w, Rng& rng) {
  return Mlp(feature_dim, std::vector<std::size_t>(w.trunk_layers, w.trunk_width), stack_dim,
             Activation::kRelu, 0.0, true, rng);
}

Mlp make_reconstructor(std::size_t stack_dim, std::size_t channels, const NetWidths& w, Rng& rng) {
  return Mlp(stack_dim, w.reconstructor_hidden, channels, Activation::kRelu, 0.0, true, rng);
}

Mlp make_discriminator(std::size_t stack_dim, const NetWidths& w, Rng& rng) {
  return Mlp(stack_dim, w.discriminator_hidden, 1, Activation::kLeakyRelu, w.discriminator_slope,
             true, rng);
}

Mlp make_baseline_mlp(std::size_t feature_dim, std::size_t channels, const NetWidths& w, Rng& rng) {
  return Mlp(feature_dim, std::vector<std::size_t>(w.trunk_layers, w.trunk_width), channels,
             Activation::kRelu, 0.0, true, rng);
}

Tensor forward_patch_mlp(const Tensor& features, const Mlp& net) {
  check_input(features, net, "forward_patch_mlp");
  return net.forward(features);
}

Tensor forward_reconstructor(const Tensor& stacks, const Mlp& net) {
  check_input(stacks, net, "forward_reconstructor");
  return net.forward(stacks);
}

Tensor forward_discriminator(const Tensor& stacks, const Mlp& net) {
  check_input(stacks, net, "forward_discriminator");
  return net.forward(stacks);
}

DeepLinearKernel::DeepLinearKernel(std::vector<std::size_t> kernel_sizes, std::size_t channels,
                                   Rng& rng, double noise) {
  if (kernel_sizes.empty()) throw ConfigError("deep linear kernel needs at least one layer");
  for (std::size_t l = 0; l < kernel_sizes.size(); ++l) {
    const std::size_t k = kernel_sizes[l];
    if (k % 2 == 0) throw ConfigError("deep linear kernel layer sizes must be odd");
    const std::size_t cin = l == 0 ? 1 : channels;
    const std::size_t cout = l + 1 == kernel_sizes.size() ? 1 : channels;
    Tensor w(Shape{cout, cin, k, k}, 0.0, true);
    auto d = w.data();
    for (double& v : d) v = noise * rng.normal();
    // Delta on the channel-0 path.
    d[(k / 2) * k + k / 2] += 1.0;
    layers_.push_back(std::move(w));
  }
}

DeepLinearKernel::DeepLinearKernel(std::vector<Tensor> layers) : layers_(std::move(layers)) {
  std::size_t channels = 1;
  for (const Tensor& w : layers_) {
    if (w.rank() != 4 || w.dim(1) != channels || w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0) {
      throw DimensionError("deep linear kernel layer " + shape_string(w.shape()) +
                           " does not chain from " + std::to_string(channels) + " channels");
    }
    channels = w.dim(0);
  }
  if (layers_.empty() || channels != 1) {
    throw DimensionError("deep linear kernel must end in a single channel");
  }
}

std::size_t DeepLinearKernel::support() const {
  std::size_t k = 1;
  for (const Tensor& w : layers_) k += w.dim(2) - 1;
  return k;
}

std::size_t DeepLinearKernel::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& w : layers_) n += w.numel();
  return n;
}

Tensor DeepLinearKernel::collapse() const {
  Tensor acc(Shape{1, 1, 1}, 1.0);
  for (const Tensor& w : layers_) acc = compose_kernels(acc, w);
  const std::size_t k = support();
  return reshape(acc, Shape{k, k});
}

Tensor apply_fixed_downsample(const Tensor& image, const Tensor& kernel, std::size_t factor) {
  if (image.rank() != 3) throw DimensionError("downsample: expected an H x W x C image");
  if (factor == 0 || image.dim(0) % factor != 0 || image.dim(1) % factor != 0) {
    throw ContractError("downsample: image " + shape_string(image.shape()) +
                        " is not divisible by factor " + std::to_string(factor));
  }
  return conv_subsample(image, kernel, factor);
}

Tensor apply_kernel_downsample(const Tensor& image, const DeepLinearKernel& net, std::size_t factor) {
  return apply_fixed_downsample(image, net.collapse(), factor);
}

ImageGrid apply_layers_sequentially(const ImageGrid& img, const DeepLinearKernel& net,
                                    std::size_t factor) {
  if (factor == 0 || img.height % factor != 0 || img.width % factor != 0) {
    throw ContractError("downsample: image not divisible by factor");
  }
  const long pad = static_cast<long>(net.support() / 2);
  const std::size_t C = img.channels;
  std::size_t h = img.height + 2 * static_cast<std::size_t>(pad);
  std::size_t w = img.width + 2 * static_cast<std::size_t>(pad);
  // planes[channel_path][image_channel] as h x w arrays
  std::vector<std::vector<double>> planes(1, std::vector<double>(h * w * C));
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = reflect_index(static_cast<long>(y) - pad, img.height);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = reflect_index(static_cast<long>(x) - pad, img.width);
      for (std::size_t c = 0; c < C; ++c) planes[0][(y * w + x) * C + c] = img.at(sy, sx, c);
    }
  }
  for (const Tensor& layer : net.layers()) {
    const std::size_t cout = layer.dim(0), cin = layer.dim(1), k = layer.dim(2);
    const std::size_t nh = h - k + 1, nw = w - k + 1;
    std::vector<std::vector<double>> next(cout, std::vector<double>(nh * nw * C, 0.0));
    const auto wd = layer.data();
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t i = 0; i < cin; ++i) {
        for (std::size_t a = 0; a < k; ++a) {
          for (std::size_t b = 0; b < k; ++b) {
            const double kv = wd[((o * cin + i) * k + a) * k + b];
            for (std::size_t y = 0; y < nh; ++y) {
              for (std::size_t x = 0; x < nw; ++x) {
                for (std::size_t c = 0; c < C; ++c) {
                  next[o][(y * nw + x) * C + c] += kv * planes[i][((y + a) * w + x + b) * C + c];
                }
              }
            }
          }
        }
      }
    }
    planes = std::move(next);
    h = nh;
    w = nw;
  }
  ImageGrid out(img.height / factor, img.width / factor, C);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      for (std::size_t c = 0; c < C; ++c) out.at(y, x, c) = planes[0][((y * factor) * w + x * factor) * C + c];
    }
  }
  return out;
}

std::size_t parameter_count(const Mlp& net) { return net.parameter_count(); }
std::size_t parameter_count(const DeepLinearKernel& net) { return net.parameter_count(); }

}  // namespace knitwork

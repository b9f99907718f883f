#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "knitwork/image.hpp"
#include "knitwork/random.hpp"
#include "knitwork/tensor.hpp"

namespace knitwork {

enum class Activation { kRelu, kLeakyRelu };

struct LinearLayer {
  Tensor weight;  // in x out
  Tensor bias;    // out
};

// Fully connected network: hidden layers with one activation, a linear head
// and an optional sigmoid on the output.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t output_dim,
      Activation activation, double leaky_slope, bool sigmoid_output, Rng& rng);

  Tensor forward(const Tensor& x) const;

  std::size_t input_dim() const { return layers_.front().weight.dim(0); }
  std::size_t output_dim() const { return layers_.back().weight.dim(1); }
  std::size_t hidden_layers() const { return layers_.size() - 1; }
  std::size_t parameter_count() const;

  std::vector<Tensor> parameters() const;
  std::vector<LinearLayer>& layers() { return layers_; }
  const std::vector<LinearLayer>& layers() const { return layers_; }
  Activation activation() const { return activation_; }
  // Toggle gradient tracking of every parameter (frozen nets skip weight grads).
  void set_trainable(bool on);

 private:
  std::vector<LinearLayer> layers_;
  Activation activation_ = Activation::kRelu;
  double leaky_slope_ = 0.2;
  bool sigmoid_output_ = true;
};

struct NetWidths {
  std::size_t trunk_width = 256;
  std::size_t trunk_layers = 4;
  std::vector<std::size_t> reconstructor_hidden{256, 256};
  std::vector<std::size_t> discriminator_hidden{256, 256, 256};
  double discriminator_slope = 0.2;
};

// Coordinate features (2m) -> flattened patch stack (S p^2 C).
Mlp make_patch_mlp(std::size_t feature_dim, std::size_t stack_dim, const NetWidths& w, Rng& rng);
// Patch stack -> color (C).
Mlp make_reconstructor(std::size_t stack_dim, std::size_t channels, const NetWidths& w, Rng& rng);
// Patch stack -> realness confidence (1).
Mlp make_discriminator(std::size_t stack_dim, const NetWidths& w, Rng& rng);
// Coordinate features -> color; the conventional coordinate MLP.
Mlp make_baseline_mlp(std::size_t feature_dim, std::size_t channels, const NetWidths& w, Rng& rng);

Tensor forward_patch_mlp(const Tensor& features, const Mlp& net);
Tensor forward_reconstructor(const Tensor& stacks, const Mlp& net);
Tensor forward_discriminator(const Tensor& stacks, const Mlp& net);

// Stack of activation-free convolutions collapsing to one odd-sized kernel.
// Layer l has weights [c_out x c_in x k_l x k_l]; the first layer reads one
// channel and the last writes one.
class DeepLinearKernel {
 public:
  DeepLinearKernel() = default;
  // Near-delta initialization: channel 0 carries a delta path, everything gets
  // N(0, noise^2) perturbation.
  DeepLinearKernel(std::vector<std::size_t> kernel_sizes, std::size_t channels, Rng& rng,
                   double noise = 1e-2);
  // Explicit layer weights (rank 4 each, chained channel counts).
  explicit DeepLinearKernel(std::vector<Tensor> layers);

  std::size_t support() const;  // side of the collapsed kernel
  std::size_t parameter_count() const;
  const std::vector<Tensor>& layers() const { return layers_; }
  std::vector<Tensor> parameters() const { return layers_; }

  // Differentiable [K x K] effective kernel.
  Tensor collapse() const;

 private:
  std::vector<Tensor> layers_;
};

// Collapse then correlate with reflect padding and keep every factor-th pixel.
// Differentiable in both the image [H x W x C] and the kernel weights.
Tensor apply_kernel_downsample(const Tensor& image, const DeepLinearKernel& net, std::size_t factor);
// Same with a fixed [K x K] kernel (known-kernel mode).
Tensor apply_fixed_downsample(const Tensor& image, const Tensor& kernel, std::size_t factor);

// Reference path: reflect-pad once by the total radius, apply every layer as a
// valid correlation in turn, then subsample. No gradient tracking.
ImageGrid apply_layers_sequentially(const ImageGrid& img, const DeepLinearKernel& net,
                                    std::size_t factor);

std::size_t parameter_count(const Mlp& net);
std::size_t parameter_count(const DeepLinearKernel& net);

}  // namespace knitwork

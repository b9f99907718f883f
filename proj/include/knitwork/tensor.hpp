#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle to shared storage. Operations on tensors that
// require gradients record a backward node linking the result to its inputs;
// backward() walks that graph once, accumulates gradients into the leaves and
// then releases the recorded graph.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace knitwork {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct TensorImpl;

struct Node {
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  // Reads the output gradient and accumulates into the inputs' gradients.
  std::function<void(const TensorImpl& out)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_rows(const std::vector<std::vector<double>>& rows, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double item() const;
  double at(std::size_t i) const { return impl_->data[i]; }
  double& at(std::size_t i) { return impl_->data[i]; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient values; all zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> grad_span() { return impl_->ensure_grad(); }
  void zero_grad();

  // True when this tensor was produced by a recorded operation.
  bool has_node() const { return impl_->node != nullptr; }

  // Same values, no gradient tracking, independent storage.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Populates grad on every requires_grad leaf reachable from loss (which must
// hold exactly one element) and releases the recorded graph.
void backward(const Tensor& loss);

// ---- operations -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// x[N x in] * w[in x out] + bias[out]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

// Elementwise binary ops: equal shapes, or one side holding a single element.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& t);
Tensor leaky_relu(const Tensor& t, double slope);
Tensor sigmoid(const Tensor& t);
Tensor square(const Tensor& t);
Tensor abs(const Tensor& t);

enum class ElementwiseOp { kAdd, kSub, kMul, kRelu, kLeakyRelu, kSigmoid, kSquare, kAbs };
// Table-driven entry point over the ops above; `slope` is used by leaky_relu.
Tensor elementwise(ElementwiseOp op, std::span<const Tensor> operands, double slope = 0.0);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);
Tensor sum(const Tensor& t, const std::vector<std::size_t>& axes);
Tensor mean(const Tensor& t, const std::vector<std::size_t>& axes);

// Same data, new shape with equal element count.
Tensor reshape(const Tensor& t, Shape shape);
// Rows [begin, end) of a rank-2 tensor.
Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end);
// Selected rows of a rank-2 tensor (indices may repeat).
Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows);

// One term of a paired squared difference: weight * (t[a] - t[b])^2 with flat
// element indices into the same tensor.
struct PairTerm {
  std::size_t a;
  std::size_t b;
  double weight;
};
// Sum over terms; gradients flow into both elements of every pair.
Tensor paired_squared_difference(const Tensor& t, std::span<const PairTerm> terms);

// Mean binary cross-entropy of probabilities against a constant target.
// Scores are clamped to [eps, 1 - eps]; clamped entries get zero gradient.
Tensor bce_mean(const Tensor& scores, double target, double eps = 1e-7);
// Mean of ln(1 - s) with the same clamping (saturating generator term).
Tensor log_one_minus_mean(const Tensor& scores, double eps = 1e-7);

// 2-D image ops on [H x W x C] tensors.
// Full 2-D convolution of a stack of kernels: acc[Cin x h x w] with
// weights[Cout x Cin x k x k] -> [Cout x (h+k-1) x (w+k-1)].
Tensor compose_kernels(const Tensor& acc, const Tensor& weights);
// Reflect-pad by the kernel radius, correlate every channel with a single
// odd-sized kernel [kh x kw], keep positions (stride*i, stride*j).
Tensor conv_subsample(const Tensor& image, const Tensor& kernel, std::size_t stride);

}  // namespace knitwork

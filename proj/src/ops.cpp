#include <algorithm>
#include <cmath>
#include <numeric>

#include "knitwork/errors.hpp"
#include "knitwork/simd.hpp"
#include "knitwork/tensor.hpp"

namespace knitwork {
namespace {

using ImplPtr = std::shared_ptr<TensorImpl>;
using Backward = std::function<void(const TensorImpl&)>;

Tensor record(Tensor out, std::vector<ImplPtr> inputs, Backward fn) {
  if (!grad_enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const ImplPtr& p) { return p->requires_grad; });
  if (!any) return out;
  auto node = std::make_shared<Node>();
  node->inputs = std::move(inputs);
  node->backward = std::move(fn);
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         " tensor, got " + shape_string(t.shape()));
  }
}

enum class Broadcast { kEqual, kScalarA, kScalarB };

Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() == b.shape()) return Broadcast::kEqual;
  if (a.numel() == 1) return Broadcast::kScalarA;
  if (b.numel() == 1) return Broadcast::kScalarB;
  throw DimensionError(std::string(what) + ": incompatible shapes " + shape_string(a.shape()) +
                       " and " + shape_string(b.shape()));
}

// Applies f(x, y) over a broadcast pair and records d/dx, d/dy.
template <typename F, typename Dx, typename Dy>
Tensor binary(const Tensor& a, const Tensor& b, const char* what, F f, Dx dfdx, Dy dfdy) {
  const Broadcast kind = broadcast_kind(a, b, what);
  const Shape shape = kind == Broadcast::kScalarA ? b.shape() : a.shape();
  const std::size_t n = shape_numel(shape);
  const auto ad = a.data();
  const auto bd = b.data();
  auto ai = [&](std::size_t i) { return kind == Broadcast::kScalarA ? ad[0] : ad[i]; };
  auto bi = [&](std::size_t i) { return kind == Broadcast::kScalarB ? bd[0] : bd[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ai(i), bi(i));
  ImplPtr pa = a.impl(), pb = b.impl();
  return record(Tensor(shape, std::move(out)), {pa, pb}, [pa, pb, kind, dfdx, dfdy](const TensorImpl& o) {
    const std::size_t n = o.data.size();
    auto av = [&](std::size_t i) { return kind == Broadcast::kScalarA ? pa->data[0] : pa->data[i]; };
    auto bv = [&](std::size_t i) { return kind == Broadcast::kScalarB ? pb->data[0] : pb->data[i]; };
    if (pa->requires_grad) {
      auto& g = pa->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        g[kind == Broadcast::kScalarA ? 0 : i] += o.grad[i] * dfdx(av(i), bv(i));
      }
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::size_t i = 0; i < n; ++i) {
        g[kind == Broadcast::kScalarB ? 0 : i] += o.grad[i] * dfdy(av(i), bv(i));
      }
    }
  });
}

// Unary op whose derivative is expressed through input x and output y.
template <typename F, typename D>
Tensor unary(const Tensor& t, F f, D dydx) {
  std::vector<double> out(t.numel());
  const auto in = t.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  ImplPtr p = t.impl();
  return record(Tensor(t.shape(), std::move(out)), {p}, [p, dydx](const TensorImpl& o) {
    auto& g = p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * dydx(p->data[i], o.data[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  Tensor out(Shape{m, n});
  simd::gemm({simd::Trans::kNo, simd::Trans::kNo, m, n, k, a.data().data(), k, b.data().data(), n,
              out.data().data(), n, false});
  ImplPtr pa = a.impl(), pb = b.impl();
  return record(std::move(out), {pa, pb}, [pa, pb, m, n, k](const TensorImpl& o) {
    if (pa->requires_grad) {
      simd::gemm({simd::Trans::kNo, simd::Trans::kYes, m, k, n, o.grad.data(), n, pb->data.data(), n,
                  pa->ensure_grad().data(), k, true});
    }
    if (pb->requires_grad) {
      simd::gemm({simd::Trans::kYes, simd::Trans::kNo, k, n, m, pa->data.data(), k, o.grad.data(), n,
                  pb->ensure_grad().data(), n, true});
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_rank(x, 2, "linear input");
  require_rank(w, 2, "linear weight");
  require_rank(bias, 1, "linear bias");
  const std::size_t rows = x.dim(0), in = x.dim(1), out_dim = w.dim(1);
  if (w.dim(0) != in || bias.dim(0) != out_dim) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(w.shape()) + " and bias " + shape_string(bias.shape()));
  }
  Tensor out(Shape{rows, out_dim});
  auto od = out.data();
  simd::gemm({simd::Trans::kNo, simd::Trans::kNo, rows, out_dim, in, x.data().data(), in,
              w.data().data(), out_dim, od.data(), out_dim, false});
  const auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = od.data() + r * out_dim;
    for (std::size_t j = 0; j < out_dim; ++j) row[j] += bd[j];
  }
  ImplPtr px = x.impl(), pw = w.impl(), pb = bias.impl();
  return record(std::move(out), {px, pw, pb}, [px, pw, pb, rows, in, out_dim](const TensorImpl& o) {
    if (px->requires_grad) {
      simd::gemm({simd::Trans::kNo, simd::Trans::kYes, rows, in, out_dim, o.grad.data(), out_dim,
                  pw->data.data(), out_dim, px->ensure_grad().data(), in, true});
    }
    if (pw->requires_grad) {
      simd::gemm({simd::Trans::kYes, simd::Trans::kNo, in, out_dim, rows, px->data.data(), in,
                  o.grad.data(), out_dim, pw->ensure_grad().data(), out_dim, true});
    }
    if (pb->requires_grad) {
      auto& g = pb->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const double* row = o.grad.data() + r * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) g[j] += row[j];
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& t) {
  return unary(
      t, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& t, double slope) {
  return unary(
      t, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& t) {
  return unary(t, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor square(const Tensor& t) {
  return unary(
      t, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& t) {
  return unary(
      t, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor elementwise(ElementwiseOp op, std::span<const Tensor> operands, double slope) {
  const bool is_binary =
      op == ElementwiseOp::kAdd || op == ElementwiseOp::kSub || op == ElementwiseOp::kMul;
  if (operands.size() != (is_binary ? 2u : 1u)) {
    throw ContractError("elementwise: wrong operand count");
  }
  switch (op) {
    case ElementwiseOp::kAdd: return add(operands[0], operands[1]);
    case ElementwiseOp::kSub: return sub(operands[0], operands[1]);
    case ElementwiseOp::kMul: return mul(operands[0], operands[1]);
    case ElementwiseOp::kRelu: return relu(operands[0]);
    case ElementwiseOp::kLeakyRelu: return leaky_relu(operands[0], slope);
    case ElementwiseOp::kSigmoid: return sigmoid(operands[0]);
    case ElementwiseOp::kSquare: return square(operands[0]);
    case ElementwiseOp::kAbs: return abs(operands[0]);
  }
  throw ContractError("elementwise: unknown op");
}

Tensor sum(const Tensor& t) {
  const auto d = t.data();
  const double total = std::accumulate(d.begin(), d.end(), 0.0);
  ImplPtr p = t.impl();
  return record(Tensor::scalar(total), {p}, [p](const TensorImpl& o) {
    auto& g = p->ensure_grad();
    for (double& x : g) x += o.grad[0];
  });
}

Tensor mean(const Tensor& t) {
  if (t.numel() == 0) throw ContractError("mean of an empty tensor");
  return scale(sum(t), 1.0 / static_cast<double>(t.numel()));
}

Tensor sum(const Tensor& t, const std::vector<std::size_t>& axes) {
  const Shape& in_shape = t.shape();
  std::vector<bool> reduced(in_shape.size(), false);
  for (std::size_t ax : axes) {
    if (ax >= in_shape.size()) {
      throw DimensionError("reduce: axis " + std::to_string(ax) + " invalid for shape " +
                           shape_string(in_shape));
    }
    reduced[ax] = true;
  }
  Shape out_shape;
  for (std::size_t i = 0; i < in_shape.size(); ++i) {
    if (!reduced[i]) out_shape.push_back(in_shape[i]);
  }
  // Output stride contributed by each input axis (0 for reduced axes).
  std::vector<std::size_t> out_stride(in_shape.size(), 0);
  {
    std::size_t s = 1;
    for (std::size_t i = in_shape.size(); i-- > 0;) {
      if (!reduced[i]) {
        out_stride[i] = s;
        s *= in_shape[i];
      }
    }
  }
  const std::size_t n = t.numel();
  std::vector<std::size_t> target(n);
  std::vector<std::size_t> idx(in_shape.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t o = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) o += idx[i] * out_stride[i];
    target[flat] = o;
    for (std::size_t i = idx.size(); i-- > 0;) {
      if (++idx[i] < in_shape[i]) break;
      idx[i] = 0;
    }
  }
  std::vector<double> out(shape_numel(out_shape), 0.0);
  const auto d = t.data();
  for (std::size_t flat = 0; flat < n; ++flat) out[target[flat]] += d[flat];
  ImplPtr p = t.impl();
  return record(Tensor(out_shape, std::move(out)), {p}, [p, target](const TensorImpl& o) {
    auto& g = p->ensure_grad();
    for (std::size_t flat = 0; flat < g.size(); ++flat) g[flat] += o.grad[target[flat]];
  });
}

Tensor mean(const Tensor& t, const std::vector<std::size_t>& axes) {
  Tensor s = sum(t, axes);
  const std::size_t count = s.numel() == 0 ? 0 : t.numel() / s.numel();
  if (count == 0) throw ContractError("mean over an empty extent");
  return scale(s, 1.0 / static_cast<double>(count));
}

Tensor reshape(const Tensor& t, Shape shape) {
  if (shape_numel(shape) != t.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(t.shape()) + " as " +
                         shape_string(shape));
  }
  ImplPtr p = t.impl();
  std::vector<double> copy(t.data().begin(), t.data().end());
  return record(Tensor(std::move(shape), std::move(copy)), {p}, [p](const TensorImpl& o) {
    auto& g = p->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor slice_rows(const Tensor& t, std::size_t begin, std::size_t end) {
  require_rank(t, 2, "slice_rows");
  if (begin > end || end > t.dim(0)) throw DimensionError("slice_rows: range out of bounds");
  const std::size_t cols = t.dim(1);
  const auto d = t.data();
  std::vector<double> out(d.begin() + static_cast<std::ptrdiff_t>(begin * cols),
                          d.begin() + static_cast<std::ptrdiff_t>(end * cols));
  ImplPtr p = t.impl();
  return record(Tensor(Shape{end - begin, cols}, std::move(out)), {p},
                [p, begin, cols](const TensorImpl& o) {
                  auto& g = p->ensure_grad();
                  for (std::size_t i = 0; i < o.grad.size(); ++i) g[begin * cols + i] += o.grad[i];
                });
}

Tensor gather_rows(const Tensor& t, std::span<const std::size_t> rows) {
  require_rank(t, 2, "gather_rows");
  const std::size_t cols = t.dim(1);
  const auto d = t.data();
  std::vector<double> out(rows.size() * cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= t.dim(0)) throw DimensionError("gather_rows: row index out of range");
    std::copy_n(d.data() + rows[r] * cols, cols, out.data() + r * cols);
  }
  ImplPtr p = t.impl();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return record(Tensor(Shape{rows.size(), cols}, std::move(out)), {p},
                [p, idx, cols](const TensorImpl& o) {
                  auto& g = p->ensure_grad();
                  for (std::size_t r = 0; r < idx.size(); ++r) {
                    for (std::size_t c = 0; c < cols; ++c) g[idx[r] * cols + c] += o.grad[r * cols + c];
                  }
                });
}

Tensor paired_squared_difference(const Tensor& t, std::span<const PairTerm> terms) {
  const auto d = t.data();
  double total = 0.0;
  for (const PairTerm& term : terms) {
    if (term.a >= d.size() || term.b >= d.size()) {
      throw DimensionError("paired_squared_difference: element index out of range");
    }
    const double diff = d[term.a] - d[term.b];
    total += term.weight * diff * diff;
  }
  ImplPtr p = t.impl();
  std::vector<PairTerm> kept(terms.begin(), terms.end());
  return record(Tensor::scalar(total), {p}, [p, kept = std::move(kept)](const TensorImpl& o) {
    auto& g = p->ensure_grad();
    const double up = o.grad[0];
    for (const PairTerm& term : kept) {
      const double v = 2.0 * term.weight * (p->data[term.a] - p->data[term.b]) * up;
      g[term.a] += v;
      g[term.b] -= v;
    }
  });
}

Tensor bce_mean(const Tensor& scores, double target, double eps) {
  const std::size_t n = scores.numel();
  if (n == 0) throw ContractError("bce_mean of an empty score set");
  const auto s = scores.data();
  double total = 0.0;
  for (double x : s) {
    const double c = std::clamp(x, eps, 1.0 - eps);
    total -= target * std::log(c) + (1.0 - target) * std::log(1.0 - c);
  }
  ImplPtr p = scores.impl();
  return record(Tensor::scalar(total / static_cast<double>(n)), {p},
                [p, target, eps, n](const TensorImpl& o) {
                  auto& g = p->ensure_grad();
                  const double up = o.grad[0] / static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double x = p->data[i];
                    if (x < eps || x > 1.0 - eps) continue;
                    g[i] += up * (-(target / x) + (1.0 - target) / (1.0 - x));
                  }
                });
}

Tensor log_one_minus_mean(const Tensor& scores, double eps) {
  const std::size_t n = scores.numel();
  if (n == 0) throw ContractError("log_one_minus_mean of an empty score set");
  double total = 0.0;
  for (double x : scores.data()) total += std::log(1.0 - std::clamp(x, eps, 1.0 - eps));
  ImplPtr p = scores.impl();
  return record(Tensor::scalar(total / static_cast<double>(n)), {p},
                [p, eps, n](const TensorImpl& o) {
                  auto& g = p->ensure_grad();
                  const double up = o.grad[0] / static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double x = p->data[i];
                    if (x < eps || x > 1.0 - eps) continue;
                    g[i] -= up / (1.0 - x);
                  }
                });
}

}  // namespace knitwork

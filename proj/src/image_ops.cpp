#include <algorithm>
#include <cmath>
#include <string>

#include "knitwork/errors.hpp"
#include "knitwork/image.hpp"

namespace knitwork {

Tensor ImageGrid::to_tensor(bool requires_grad) const {
  return Tensor(Shape{height, width, channels}, data, requires_grad);
}

ImageGrid ImageGrid::from_tensor(const Tensor& t) {
  if (t.rank() != 3) throw DimensionError("image tensor must be H x W x C, got " + shape_string(t.shape()));
  ImageGrid img(t.dim(0), t.dim(1), t.dim(2));
  std::copy(t.data().begin(), t.data().end(), img.data.begin());
  return img;
}

void clamp_unit(ImageGrid& img) {
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
}

void require_unit_image(const ImageGrid& img, const char* what) {
  if (img.channels != 1 && img.channels != 3) {
    throw ContractError(std::string(what) + ": images must have 1 or 3 channels");
  }
  if (img.data.size() != img.height * img.width * img.channels) {
    throw DimensionError(std::string(what) + ": image buffer size disagrees with its dimensions");
  }
  for (double v : img.data) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ContractError(std::string(what) + ": image values must lie in [0, 1]");
    }
  }
}

Tensor compose_kernels(const Tensor& acc, const Tensor& weights) {
  if (acc.rank() != 3 || weights.rank() != 4 || weights.dim(1) != acc.dim(0)) {
    throw DimensionError("compose_kernels: stack " + shape_string(acc.shape()) +
                         " does not match layer weights " + shape_string(weights.shape()));
  }
  const std::size_t cin = acc.dim(0), h = acc.dim(1), w = acc.dim(2);
  const std::size_t cout = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t oh = h + kh - 1, ow = w + kw - 1;
  Tensor out(Shape{cout, oh, ow});
  const double* A = acc.data().data();
  const double* W = weights.data().data();
  double* O = out.data().data();
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t i = 0; i < cin; ++i) {
      const double* src = A + i * h * w;
      const double* ker = W + (o * cin + i) * kh * kw;
      double* dst = O + o * oh * ow;
      for (std::size_t a = 0; a < kh; ++a) {
        for (std::size_t b = 0; b < kw; ++b) {
          const double k = ker[a * kw + b];
          for (std::size_t y = 0; y < h; ++y) {
            double* drow = dst + (y + a) * ow + b;
            const double* srow = src + y * w;
            for (std::size_t x = 0; x < w; ++x) drow[x] += k * srow[x];
          }
        }
      }
    }
  }

  auto pa = acc.impl();
  auto pw = weights.impl();
  if (!grad_enabled() || (!pa->requires_grad && !pw->requires_grad)) return out;
  auto node = std::make_shared<Node>();
  node->inputs = {pa, pw};
  node->backward = [pa, pw, cin, h, w, cout, kh, kw, oh, ow](const TensorImpl& o) {
    const double* G = o.grad.data();
    for (std::size_t oc = 0; oc < cout; ++oc) {
      for (std::size_t i = 0; i < cin; ++i) {
        const double* gsrc = G + oc * oh * ow;
        const std::size_t koff = (oc * cin + i) * kh * kw;
        for (std::size_t a = 0; a < kh; ++a) {
          for (std::size_t b = 0; b < kw; ++b) {
            double dk = 0.0;
            const double k = pw->data[koff + a * kw + b];
            for (std::size_t y = 0; y < h; ++y) {
              const double* grow = gsrc + (y + a) * ow + b;
              const double* arow = pa->data.data() + i * h * w + y * w;
              if (pa->requires_grad) {
                double* darow = pa->ensure_grad().data() + i * h * w + y * w;
                for (std::size_t x = 0; x < w; ++x) darow[x] += k * grow[x];
              }
              for (std::size_t x = 0; x < w; ++x) dk += grow[x] * arow[x];
            }
            if (pw->requires_grad) pw->ensure_grad()[koff + a * kw + b] += dk;
          }
        }
      }
    }
  };
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

Tensor conv_subsample(const Tensor& image, const Tensor& kernel, std::size_t stride) {
  if (image.rank() != 3 || kernel.rank() != 2) {
    throw DimensionError("conv_subsample: expected H x W x C image and 2-D kernel, got " +
                         shape_string(image.shape()) + " and " + shape_string(kernel.shape()));
  }
  const std::size_t H = image.dim(0), W = image.dim(1), C = image.dim(2);
  const std::size_t kh = kernel.dim(0), kw = kernel.dim(1);
  if (kh % 2 == 0 || kw % 2 == 0) throw DimensionError("conv_subsample: kernel sides must be odd");
  if (stride == 0 || H % stride != 0 || W % stride != 0) {
    throw ContractError("conv_subsample: image " + shape_string(image.shape()) +
                        " is not divisible by stride " + std::to_string(stride));
  }
  const long rh = static_cast<long>(kh / 2), rw = static_cast<long>(kw / 2);
  const std::size_t oh = H / stride, ow = W / stride;
  // Source pixel for each (output row, kernel row) and (output col, kernel col).
  std::vector<std::size_t> src_r(oh * kh), src_c(ow * kw);
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t a = 0; a < kh; ++a) {
      src_r[i * kh + a] = reflect_index(static_cast<long>(i * stride + a) - rh, H);
    }
  }
  for (std::size_t j = 0; j < ow; ++j) {
    for (std::size_t b = 0; b < kw; ++b) {
      src_c[j * kw + b] = reflect_index(static_cast<long>(j * stride + b) - rw, W);
    }
  }
  Tensor out(Shape{oh, ow, C});
  const double* X = image.data().data();
  const double* K = kernel.data().data();
  double* O = out.data().data();
  for (std::size_t i = 0; i < oh; ++i) {
    for (std::size_t j = 0; j < ow; ++j) {
      for (std::size_t a = 0; a < kh; ++a) {
        const std::size_t r = src_r[i * kh + a];
        for (std::size_t b = 0; b < kw; ++b) {
          const double k = K[a * kw + b];
          const double* px = X + (r * W + src_c[j * kw + b]) * C;
          double* po = O + (i * ow + j) * C;
          for (std::size_t ch = 0; ch < C; ++ch) po[ch] += k * px[ch];
        }
      }
    }
  }

  auto pi = image.impl();
  auto pk = kernel.impl();
  if (!grad_enabled() || (!pi->requires_grad && !pk->requires_grad)) return out;
  auto node = std::make_shared<Node>();
  node->inputs = {pi, pk};
  node->backward = [pi, pk, src_r = std::move(src_r), src_c = std::move(src_c), W, C, kh, kw, oh,
                    ow](const TensorImpl& o) {
    const double* G = o.grad.data();
    double* dX = pi->requires_grad ? pi->ensure_grad().data() : nullptr;
    double* dK = pk->requires_grad ? pk->ensure_grad().data() : nullptr;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        const double* go = G + (i * ow + j) * C;
        for (std::size_t a = 0; a < kh; ++a) {
          const std::size_t r = src_r[i * kh + a];
          for (std::size_t b = 0; b < kw; ++b) {
            const std::size_t off = (r * W + src_c[j * kw + b]) * C;
            const double k = pk->data[a * kw + b];
            double dk = 0.0;
            for (std::size_t ch = 0; ch < C; ++ch) {
              dk += go[ch] * pi->data[off + ch];
              if (dX) dX[off + ch] += k * go[ch];
            }
            if (dK) dK[a * kw + b] += dk;
          }
        }
      }
    }
  };
  out.impl()->node = std::move(node);
  out.impl()->requires_grad = true;
  return out;
}

}  // namespace knitwork

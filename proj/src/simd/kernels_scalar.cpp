// Portable reference kernels. Compiled without ISA extension flags so the
// compiler cannot contract multiply-adds; the Adam update here is the
// bit-exact reference for the vector variants.

#include <cmath>
#include <vector>

#include "knitwork/simd.hpp"

namespace knitwork::simd::detail {

void gemm_scalar(const GemmArgs& g) {
  if (g.m == 0 || g.n == 0) return;
  std::vector<double> row(g.n);
  for (std::size_t i = 0; i < g.m; ++i) {
    std::fill(row.begin(), row.end(), 0.0);
    for (std::size_t p = 0; p < g.k; ++p) {
      const double a = g.ta == Trans::kNo ? g.a[i * g.lda + p] : g.a[p * g.lda + i];
      if (g.tb == Trans::kNo) {
        const double* brow = g.b + p * g.ldb;
        for (std::size_t j = 0; j < g.n; ++j) row[j] += a * brow[j];
      } else {
        for (std::size_t j = 0; j < g.n; ++j) row[j] += a * g.b[j * g.ldb + p];
      }
    }
    double* crow = g.c + i * g.ldc;
    if (g.accumulate) {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] += row[j];
    } else {
      for (std::size_t j = 0; j < g.n; ++j) crow[j] = row[j];
    }
  }
}

void adam_scalar(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoeffs& c) {
  const double one_minus_b1 = 1.0 - c.beta1;
  const double one_minus_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_minus_b1 * g;
    v[i] = c.beta2 * v[i] + one_minus_b2 * (g * g);
    const double m_hat = m[i] / c.bias_correction1;
    const double v_hat = v[i] / c.bias_correction2;
    param[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace knitwork::simd::detail

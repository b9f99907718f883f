// AVX2 kernels. This translation unit is compiled with -mavx2 -mfma
// and must only be entered after a CPUID check.

#include <immintrin.h>

#include <cmath>

#include "packed_gemm.hpp"

namespace knitwork::simd::detail {
namespace {

struct MicroAvx2 {
  static constexpr std::size_t kMr = 6;
  static constexpr std::size_t kNr = 8;

  static void run(std::size_t kc, const double* ap, const double* bp, double* tile) {
    __m256d acc0[kMr];
    __m256d acc1[kMr];
#pragma GCC unroll 6
    for (std::size_t r = 0; r < kMr; ++r) {
      acc0[r] = _mm256_setzero_pd();
      acc1[r] = _mm256_setzero_pd();
    }
    for (std::size_t p = 0; p < kc; ++p) {
      const __m256d b0 = _mm256_loadu_pd(bp);
      const __m256d b1 = _mm256_loadu_pd(bp + 4);
#pragma GCC unroll 6
      for (std::size_t r = 0; r < kMr; ++r) {
        const __m256d a = _mm256_set1_pd(ap[r]);
        acc0[r] = _mm256_fmadd_pd(a, b0, acc0[r]);
        acc1[r] = _mm256_fmadd_pd(a, b1, acc1[r]);
      }
      ap += kMr;
      bp += kNr;
    }
#pragma GCC unroll 6
    for (std::size_t r = 0; r < kMr; ++r) {
      _mm256_store_pd(tile + r * kNr, acc0[r]);
      _mm256_store_pd(tile + r * kNr + 4, acc1[r]);
    }
  }
};

}  // namespace

void gemm_avx2(const GemmArgs& args) { packed_gemm<MicroAvx2>(args); }

void adam_avx2(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
  const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.learning_rate);
  const __m256d eps = _mm256_set1_pd(c.epsilon);
  const std::size_t n = param.size();
  std::size_t i = 0;
  // Same operation order as the scalar reference and no fused multiply-add,
  // so results are bit-identical.
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad.data() + i);
    __m256d mi = _mm256_loadu_pd(m.data() + i);
    __m256d vi = _mm256_loadu_pd(v.data() + i);
    mi = _mm256_add_pd(_mm256_mul_pd(b1, mi), _mm256_mul_pd(omb1, g));
    vi = _mm256_add_pd(_mm256_mul_pd(b2, vi), _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m.data() + i, mi);
    _mm256_storeu_pd(v.data() + i, vi);
    const __m256d m_hat = _mm256_div_pd(mi, bc1);
    const __m256d v_hat = _mm256_div_pd(vi, bc2);
    const __m256d step =
        _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
    _mm256_storeu_pd(param.data() + i, _mm256_sub_pd(_mm256_loadu_pd(param.data() + i), step));
  }
  if (i < n) {
    adam_scalar(param.subspan(i), grad.subspan(i), m.subspan(i), v.subspan(i), c);
  }
}

}  // namespace knitwork::simd::detail

// AVX-512F kernels. This translation unit is compiled with -mavx512f -mfma
// and must only be entered after a CPUID check.

#include <immintrin.h>

#include <cmath>

#include "packed_gemm.hpp"

namespace knitwork::simd::detail {
namespace {

struct MicroAvx512 {
  static constexpr std::size_t kMr = 12;
  static constexpr std::size_t kNr = 16;

  static void run(std::size_t kc, const double* ap, const double* bp, double* tile) {
    __m512d acc0[kMr];
    __m512d acc1[kMr];
#pragma GCC unroll 12
    for (std::size_t r = 0; r < kMr; ++r) {
      acc0[r] = _mm512_setzero_pd();
      acc1[r] = _mm512_setzero_pd();
    }
    for (std::size_t p = 0; p < kc; ++p) {
      const __m512d b0 = _mm512_loadu_pd(bp);
      const __m512d b1 = _mm512_loadu_pd(bp + 8);
#pragma GCC unroll 12
      for (std::size_t r = 0; r < kMr; ++r) {
        const __m512d a = _mm512_set1_pd(ap[r]);
        acc0[r] = _mm512_fmadd_pd(a, b0, acc0[r]);
        acc1[r] = _mm512_fmadd_pd(a, b1, acc1[r]);
      }
      ap += kMr;
      bp += kNr;
    }
#pragma GCC unroll 12
    for (std::size_t r = 0; r < kMr; ++r) {
      _mm512_store_pd(tile + r * kNr, acc0[r]);
      _mm512_store_pd(tile + r * kNr + 8, acc1[r]);
    }
  }
};

}  // namespace

void gemm_avx512(const GemmArgs& args) { packed_gemm<MicroAvx512>(args); }

void adam_avx512(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoeffs& c) {
  const __m512d b1 = _mm512_set1_pd(c.beta1);
  const __m512d b2 = _mm512_set1_pd(c.beta2);
  const __m512d omb1 = _mm512_set1_pd(1.0 - c.beta1);
  const __m512d omb2 = _mm512_set1_pd(1.0 - c.beta2);
  const __m512d bc1 = _mm512_set1_pd(c.bias_correction1);
  const __m512d bc2 = _mm512_set1_pd(c.bias_correction2);
  const __m512d lr = _mm512_set1_pd(c.learning_rate);
  const __m512d eps = _mm512_set1_pd(c.epsilon);
  const std::size_t n = param.size();
  std::size_t i = 0;
  // Same operation order as the scalar reference and no fused multiply-add,
  // so results are bit-identical.
  for (; i + 8 <= n; i += 8) {
    const __m512d g = _mm512_loadu_pd(grad.data() + i);
    __m512d mi = _mm512_loadu_pd(m.data() + i);
    __m512d vi = _mm512_loadu_pd(v.data() + i);
    mi = _mm512_add_pd(_mm512_mul_pd(b1, mi), _mm512_mul_pd(omb1, g));
    vi = _mm512_add_pd(_mm512_mul_pd(b2, vi), _mm512_mul_pd(omb2, _mm512_mul_pd(g, g)));
    _mm512_storeu_pd(m.data() + i, mi);
    _mm512_storeu_pd(v.data() + i, vi);
    const __m512d m_hat = _mm512_div_pd(mi, bc1);
    const __m512d v_hat = _mm512_div_pd(vi, bc2);
    const __m512d step =
        _mm512_div_pd(_mm512_mul_pd(lr, m_hat), _mm512_add_pd(_mm512_sqrt_pd(v_hat), eps));
    _mm512_storeu_pd(param.data() + i, _mm512_sub_pd(_mm512_loadu_pd(param.data() + i), step));
  }
  if (i < n) {
    adam_scalar(param.subspan(i), grad.subspan(i), m.subspan(i), v.subspan(i), c);
  }
}

}  // namespace knitwork::simd::detail

#pragma once

// Data-parallel inner kernels with scalar, AVX2 and AVX-512 variants.
//
// The variant is selected once at startup from CPUID (override with the
// KNITWORK_ISA environment variable: scalar | avx2 | avx512) and may be
// switched at runtime for equivalence testing. Everything above this layer
// calls the dispatching entry points only.

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>

namespace knitwork::simd {

enum class Isa { kScalar, kAvx2, kAvx512 };

std::string_view isa_name(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);
bool isa_supported(Isa isa);
Isa best_supported_isa();

Isa active_isa();
// Throws ContractError when the CPU lacks the requested extension.
void set_active_isa(Isa isa);

// RAII override of the active ISA, restored on scope exit.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_active_isa(isa); }
  ~ScopedIsa() { set_active_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

enum class Trans { kNo, kYes };

// Row-major C[m x n] (=|+=) op(A)[m x k] * op(B)[k x n].
// op(A)(i, p) reads a[i * lda + p] when ta == kNo, a[p * lda + i] otherwise.
struct GemmArgs {
  Trans ta = Trans::kNo;
  Trans tb = Trans::kNo;
  std::size_t m = 0, n = 0, k = 0;
  const double* a = nullptr;
  std::size_t lda = 0;
  const double* b = nullptr;
  std::size_t ldb = 0;
  double* c = nullptr;
  std::size_t ldc = 0;
  bool accumulate = false;
};

struct AdamCoeffs {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

using GemmFn = void (*)(const GemmArgs&);
using AdamFn = void (*)(std::span<double> param, std::span<const double> grad,
                        std::span<double> m, std::span<double> v,
                        const AdamCoeffs& coeffs);

struct KernelTable {
  GemmFn gemm;
  AdamFn adam_update;
};

// Kernels of one specific variant (for equivalence tests and benchmarks).
const KernelTable& kernels(Isa isa);

void gemm(const GemmArgs& args);
void adam_update(std::span<double> param, std::span<const double> grad,
                 std::span<double> m, std::span<double> v, const AdamCoeffs& coeffs);

namespace detail {
void gemm_scalar(const GemmArgs& args);
void adam_scalar(std::span<double>, std::span<const double>, std::span<double>,
                 std::span<double>, const AdamCoeffs&);
void gemm_avx2(const GemmArgs& args);
void adam_avx2(std::span<double>, std::span<const double>, std::span<double>,
               std::span<double>, const AdamCoeffs&);
void gemm_avx512(const GemmArgs& args);
void adam_avx512(std::span<double>, std::span<const double>, std::span<double>,
                 std::span<double>, const AdamCoeffs&);
}  // namespace detail

}  // namespace knitwork::simd

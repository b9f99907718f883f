#include "knitwork/simd.hpp"

#include <cstdlib>
#include <string>

#include "knitwork/errors.hpp"

namespace knitwork::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool cpu_has_avx512() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx512f") && cpu_has_avx2();
#else
  return false;
#endif
}

const KernelTable kScalarTable{&detail::gemm_scalar, &detail::adam_scalar};
#ifdef KNITWORK_HAVE_X86_KERNELS
const KernelTable kAvx2Table{&detail::gemm_avx2, &detail::adam_avx2};
const KernelTable kAvx512Table{&detail::gemm_avx512, &detail::adam_avx512};
#endif

Isa initial_isa() {
  if (const char* env = std::getenv("KNITWORK_ISA")) {
    if (auto parsed = parse_isa(env); parsed && isa_supported(*parsed)) return *parsed;
  }
  return best_supported_isa();
}

Isa& current() {
  static Isa isa = initial_isa();
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kAvx512: return "avx512";
  }
  return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::kScalar;
  if (name == "avx2") return Isa::kAvx2;
  if (name == "avx512") return Isa::kAvx512;
  return std::nullopt;
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar: return true;
#ifdef KNITWORK_HAVE_X86_KERNELS
    case Isa::kAvx2: return cpu_has_avx2();
    case Isa::kAvx512: return cpu_has_avx512();
#else
    default: return false;
#endif
  }
  return false;
}

Isa best_supported_isa() {
  if (isa_supported(Isa::kAvx512)) return Isa::kAvx512;
  if (isa_supported(Isa::kAvx2)) return Isa::kAvx2;
  return Isa::kScalar;
}

Isa active_isa() { return current(); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ContractError("instruction set '" + std::string(isa_name(isa)) +
                        "' is not supported on this CPU");
  }
  current() = isa;
}

const KernelTable& kernels(Isa isa) {
  if (!isa_supported(isa)) {
    throw ContractError("instruction set '" + std::string(isa_name(isa)) +
                        "' is not supported on this CPU");
  }
#ifdef KNITWORK_HAVE_X86_KERNELS
  if (isa == Isa::kAvx512) return kAvx512Table;
  if (isa == Isa::kAvx2) return kAvx2Table;
#endif
  return kScalarTable;
}

void gemm(const GemmArgs& args) { kernels(current()).gemm(args); }

void adam_update(std::span<double> param, std::span<const double> grad, std::span<double> m,
                 std::span<double> v, const AdamCoeffs& coeffs) {
  kernels(current()).adam_update(param, grad, m, v, coeffs);
}

}  // namespace knitwork::simd

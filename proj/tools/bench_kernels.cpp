// Throughput of the GEMM variants on the layer shapes used in training.

#include <chrono>
#include <cstdio>
#include <string>
#include <random>
#include <vector>

#include "knitwork/simd.hpp"

namespace simd = knitwork::simd;

int main() {
  struct Shape {
    const char* what;
    simd::Trans ta, tb;
    std::size_t m, n, k;
  };
  const Shape shapes[] = {
      {"forward  X.W      ", simd::Trans::kNo, simd::Trans::kNo, 1024, 256, 256},
      {"input    dY.W^T   ", simd::Trans::kNo, simd::Trans::kYes, 1024, 256, 256},
      {"weight   X^T.dY   ", simd::Trans::kYes, simd::Trans::kNo, 256, 256, 1024},
      {"head     X.W (81) ", simd::Trans::kNo, simd::Trans::kNo, 1024, 81, 256},
  };
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (simd::Isa isa : {simd::Isa::kScalar, simd::Isa::kAvx2, simd::Isa::kAvx512}) {
    if (!simd::isa_supported(isa)) continue;
    const auto& table = simd::kernels(isa);
    for (const Shape& s : shapes) {
      std::vector<double> a(s.m * s.k), b(s.k * s.n), c(s.m * s.n);
      for (double& x : a) x = u(rng);
      for (double& x : b) x = u(rng);
      simd::GemmArgs g{s.ta, s.tb, s.m, s.n, s.k, a.data(), s.ta == simd::Trans::kNo ? s.k : s.m,
                       b.data(), s.tb == simd::Trans::kNo ? s.n : s.k, c.data(), s.n, false};
      const int reps = isa == simd::Isa::kScalar ? 3 : 30;
      table.gemm(g);
      const auto t0 = std::chrono::steady_clock::now();
      for (int r = 0; r < reps; ++r) table.gemm(g);
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const double gflops = 2.0 * s.m * s.n * s.k * reps / sec * 1e-9;
      std::printf("%-7s %s %7.2f GFLOP/s\n", std::string(simd::isa_name(isa)).c_str(), s.what, gflops);
    }
  }
}

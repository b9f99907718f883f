#pragma once

// Cache-blocked GEMM driver shared by the vector variants. Each including
// translation unit is compiled with its own ISA flags, so everything here has
// internal linkage to keep differently-compiled copies apart.

#include <algorithm>
#include <cstddef>
#include <vector>

#include "knitwork/simd.hpp"

namespace knitwork::simd {
namespace {

constexpr std::size_t kKc = 256;
constexpr std::size_t kMcRows = 96;
constexpr std::size_t kNc = 512;

inline double load_a(const GemmArgs& g, std::size_t i, std::size_t p) {
  return g.ta == Trans::kNo ? g.a[i * g.lda + p] : g.a[p * g.lda + i];
}

inline double load_b(const GemmArgs& g, std::size_t p, std::size_t j) {
  return g.tb == Trans::kNo ? g.b[p * g.ldb + j] : g.b[j * g.ldb + p];
}

// Slivers of MR rows, k-major inside a sliver, zero-padded past mc.
template <std::size_t MR>
void pack_a(const GemmArgs& g, std::size_t i0, std::size_t mc, std::size_t p0, std::size_t kc,
            double* out) {
  for (std::size_t is = 0; is < mc; is += MR) {
    const std::size_t rows = std::min(MR, mc - is);
    if (g.ta == Trans::kYes && rows == MR) {
      for (std::size_t p = 0; p < kc; ++p) {
        const double* src = g.a + (p0 + p) * g.lda + i0 + is;
        for (std::size_t r = 0; r < MR; ++r) out[r] = src[r];
        out += MR;
      }
      continue;
    }
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < MR; ++r) {
        out[r] = r < rows ? load_a(g, i0 + is + r, p0 + p) : 0.0;
      }
      out += MR;
    }
  }
}

// Slivers of NR columns, k-major inside a sliver, zero-padded past nc.
template <std::size_t NR>
void pack_b(const GemmArgs& g, std::size_t p0, std::size_t kc, std::size_t j0, std::size_t nc,
            double* out) {
  for (std::size_t js = 0; js < nc; js += NR) {
    const std::size_t cols = std::min(NR, nc - js);
    if (g.tb == Trans::kNo && cols == NR) {
      for (std::size_t p = 0; p < kc; ++p) {
        const double* src = g.b + (p0 + p) * g.ldb + j0 + js;
        for (std::size_t c = 0; c < NR; ++c) out[c] = src[c];
        out += NR;
      }
      continue;
    }
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t c = 0; c < NR; ++c) {
        out[c] = c < cols ? load_b(g, p0 + p, j0 + js + c) : 0.0;
      }
      out += NR;
    }
  }
}

// Micro must provide:
//   static constexpr std::size_t kMr, kNr;
//   static void run(std::size_t kc, const double* ap, const double* bp,
//                   double* tile /* kMr x kNr, row-major */);
template <typename Micro>
void packed_gemm(const GemmArgs& g) {
  constexpr std::size_t MR = Micro::kMr;
  constexpr std::size_t NR = Micro::kNr;
  constexpr std::size_t MC = (kMcRows / MR) * MR;
  if (g.m == 0 || g.n == 0) return;
  if (g.k == 0) {
    if (!g.accumulate) {
      for (std::size_t i = 0; i < g.m; ++i) std::fill_n(g.c + i * g.ldc, g.n, 0.0);
    }
    return;
  }

  thread_local std::vector<double> a_buf;
  thread_local std::vector<double> b_buf;
  a_buf.resize(MC * kKc);
  b_buf.resize(((kNc + NR - 1) / NR) * NR * kKc);
  alignas(64) double tile[MR * NR];

  for (std::size_t jc = 0; jc < g.n; jc += kNc) {
    const std::size_t nc = std::min(kNc, g.n - jc);
    for (std::size_t pc = 0; pc < g.k; pc += kKc) {
      const std::size_t kc = std::min(kKc, g.k - pc);
      const bool overwrite = !g.accumulate && pc == 0;
      pack_b<NR>(g, pc, kc, jc, nc, b_buf.data());
      for (std::size_t ic = 0; ic < g.m; ic += MC) {
        const std::size_t mc = std::min(MC, g.m - ic);
        pack_a<MR>(g, ic, mc, pc, kc, a_buf.data());
        for (std::size_t jr = 0; jr < nc; jr += NR) {
          const std::size_t nr = std::min(NR, nc - jr);
          const double* bp = b_buf.data() + (jr / NR) * NR * kc;
          for (std::size_t ir = 0; ir < mc; ir += MR) {
            const std::size_t mr = std::min(MR, mc - ir);
            const double* ap = a_buf.data() + (ir / MR) * MR * kc;
            Micro::run(kc, ap, bp, tile);
            double* c = g.c + (ic + ir) * g.ldc + jc + jr;
            for (std::size_t r = 0; r < mr; ++r) {
              double* crow = c + r * g.ldc;
              const double* trow = tile + r * NR;
              if (overwrite) {
                for (std::size_t j = 0; j < nr; ++j) crow[j] = trow[j];
              } else {
                for (std::size_t j = 0; j < nr; ++j) crow[j] += trow[j];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace
}  // namespace knitwork::simd

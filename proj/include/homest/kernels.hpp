#pragma once

// Data-parallel inner loops used by the solvers and estimators.
//
// Every kernel has a portable scalar reference implementation and, on
// x86-64, an AVX2/FMA variant.  The variant is chosen once at startup from
// CPUID; setting HOMEST_SIMD=scalar in the environment forces the reference
// path.  Reductions in the vector variants use a different summation order,
// so results agree with the reference to rounding, not bitwise.

#include <cstddef>
#include <span>
#include <string_view>

namespace homest::kernels {

struct KernelTable {
  const char* name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);

  // sum_i w[i] * a[i] * b[i]
  double (*weighted_dot)(const double* w, const double* a, const double* b,
                         std::size_t n);

  // out[i * rows + j] = sum_k A[i * cols + k] * w[k] * A[j * cols + k]
  // A is row-major rows x cols; out is rows x rows, both triangles written.
  void (*weighted_gram)(const double* A, std::size_t rows, std::size_t cols,
                        const double* w, double* out);

  // out[i] = max(inv_base[i] + sigma * mu[i], floor); returns how many
  // entries hit the floor.
  std::size_t (*clamped_reciprocal)(const double* inv_base, const double* mu,
                                    double sigma, double floor, double* out,
                                    std::size_t n);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

// The table selected for this process.
const KernelTable& active();

// Test hook: override the selection ("scalar" or "avx2").  Returns false if
// the requested variant is unavailable.
bool select(std::string_view name);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double weighted_dot(std::span<const double> w, std::span<const double> a,
                           std::span<const double> b) {
  return active().weighted_dot(w.data(), a.data(), b.data(), w.size());
}

}  // namespace homest::kernels

#pragma once

#include <cstddef>

namespace homest::kernels {

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double weighted_dot(const double* w, const double* a, const double* b,
                    std::size_t n);
void weighted_gram(const double* A, std::size_t rows, std::size_t cols,
                   const double* w, double* out);
std::size_t clamped_reciprocal(const double* inv_base, const double* mu,
                               double sigma, double floor, double* out,
                               std::size_t n);
}  // namespace scalar

#if defined(HOMEST_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double weighted_dot(const double* w, const double* a, const double* b,
                    std::size_t n);
void weighted_gram(const double* A, std::size_t rows, std::size_t cols,
                   const double* w, double* out);
std::size_t clamped_reciprocal(const double* inv_base, const double* mu,
                               double sigma, double floor, double* out,
                               std::size_t n);
}  // namespace avx2
#endif

}  // namespace homest::kernels

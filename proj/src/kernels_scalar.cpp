#include "kernels_impl.hpp"

#include <algorithm>

namespace homest::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double weighted_dot(const double* w, const double* a, const double* b,
                    std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

void weighted_gram(const double* A, std::size_t rows, std::size_t cols,
                   const double* w, double* out) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* ai = A + i * cols;
    for (std::size_t j = 0; j <= i; ++j) {
      const double* aj = A + j * cols;
      double s = 0.0;
      for (std::size_t k = 0; k < cols; ++k) s += ai[k] * w[k] * aj[k];
      out[i * rows + j] = s;
      out[j * rows + i] = s;
    }
  }
}

std::size_t clamped_reciprocal(const double* inv_base, const double* mu,
                               double sigma, double floor, double* out,
                               std::size_t n) {
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = inv_base[i] + sigma * mu[i];
    if (r < floor) {
      out[i] = floor;
      ++clamped;
    } else {
      out[i] = r;
    }
  }
  return clamped;
}

}  // namespace homest::kernels::scalar

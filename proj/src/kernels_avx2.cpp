#include <immintrin.h>

#include <vector>

#include "kernels_impl.hpp"

namespace homest::kernels::avx2 {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double weighted_dot(const double* w, const double* a, const double* b,
                    std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d wa0 = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(a + i));
    const __m256d wa1 =
        _mm256_mul_pd(_mm256_loadu_pd(w + i + 4), _mm256_loadu_pd(a + i + 4));
    acc0 = _mm256_fmadd_pd(wa0, _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(wa1, _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d wa = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(a + i));
    acc0 = _mm256_fmadd_pd(wa, _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += w[i] * a[i] * b[i];
  return s;
}

void weighted_gram(const double* A, std::size_t rows, std::size_t cols,
                   const double* w, double* out) {
  std::vector<double> scaled(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* ai = A + i * cols;
    std::size_t k = 0;
    for (; k + 4 <= cols; k += 4)
      _mm256_storeu_pd(scaled.data() + k,
                       _mm256_mul_pd(_mm256_loadu_pd(ai + k), _mm256_loadu_pd(w + k)));
    for (; k < cols; ++k) scaled[k] = ai[k] * w[k];
    for (std::size_t j = 0; j <= i; ++j) {
      const double s = dot(scaled.data(), A + j * cols, cols);
      out[i * rows + j] = s;
      out[j * rows + i] = s;
    }
  }
}

std::size_t clamped_reciprocal(const double* inv_base, const double* mu,
                               double sigma, double floor, double* out,
                               std::size_t n) {
  const __m256d vs = _mm256_set1_pd(sigma);
  const __m256d vf = _mm256_set1_pd(floor);
  std::size_t clamped = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r =
        _mm256_add_pd(_mm256_loadu_pd(inv_base + i), _mm256_mul_pd(vs, _mm256_loadu_pd(mu + i)));
    const __m256d below = _mm256_cmp_pd(r, vf, _CMP_LT_OQ);
    clamped += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(below)));
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(r, vf, below));
  }
  for (; i < n; ++i) {
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

}  // namespace homest::kernels::avx2

#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "homest/kernels.hpp"
#include "homest/rng.hpp"

using namespace homest;

namespace {

std::vector<double> random_vector(std::size_t n, std::uint64_t rep, double shift = 0.0) {
  Stream rng(7, StreamTag::optimizer, rep);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal() + shift;
  return v;
}

}  // namespace

TEST_CASE("scalar and avx2 reductions agree to rounding") {
  const auto* vec = kernels::avx2_table();
  if (!vec) {
    MESSAGE("avx2 variant unavailable on this host; equivalence skipped");
    return;
  }
  const auto& ref = kernels::scalar_table();
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 9u, 31u, 1000u, 1025u}) {
    const auto a = random_vector(n, 1);
    const auto b = random_vector(n, 2);
    const auto w = random_vector(n, 3, 2.0);
    double scale = 1.0;
    for (std::size_t i = 0; i < n; ++i) scale += std::abs(a[i] * b[i] * w[i]) + std::abs(a[i] * b[i]);
    CHECK(std::abs(ref.dot(a.data(), b.data(), n) - vec->dot(a.data(), b.data(), n)) <=
          1e-13 * scale);
    CHECK(std::abs(ref.weighted_dot(w.data(), a.data(), b.data(), n) -
                   vec->weighted_dot(w.data(), a.data(), b.data(), n)) <= 1e-13 * scale);
  }
}

TEST_CASE("weighted gram kernels agree and are symmetric") {
  const auto* vec = kernels::avx2_table();
  if (!vec) return;
  const auto& ref = kernels::scalar_table();
  for (std::size_t cols : {5u, 64u, 1025u}) {
    const std::size_t rows = 7;
    const auto A = random_vector(rows * cols, 4);
    const auto w = random_vector(cols, 5, 3.0);
    std::vector<double> g1(rows * rows), g2(rows * rows);
    ref.weighted_gram(A.data(), rows, cols, w.data(), g1.data());
    vec->weighted_gram(A.data(), rows, cols, w.data(), g2.data());
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < rows; ++j) {
        CHECK(g1[i * rows + j] == doctest::Approx(g2[i * rows + j]).epsilon(1e-12));
        CHECK(g2[i * rows + j] == g2[j * rows + i]);
      }
  }
}

TEST_CASE("clamped reciprocal kernels agree bitwise and count clamps") {
  const auto& ref = kernels::scalar_table();
  const std::size_t n = 1037;
  const auto mu = random_vector(n, 6);
  std::vector<double> base(n, 1.0), o1(n), o2(n);
  const std::size_t c1 = ref.clamped_reciprocal(base.data(), mu.data(), 0.6, 0.05, o1.data(), n);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < n; ++i) expected += (1.0 + 0.6 * mu[i]) <= 0.05 ? 1 : 0;
  CHECK(c1 >= expected - 1);
  CHECK(c1 <= expected + 1);
  for (double v : o1) CHECK(v >= 0.05);
  if (const auto* vec = kernels::avx2_table()) {
    const std::size_t c2 = vec->clamped_reciprocal(base.data(), mu.data(), 0.6, 0.05, o2.data(), n);
    CHECK(c1 == c2);
    for (std::size_t i = 0; i < n; ++i) CHECK(o1[i] == o2[i]);
  }
}

TEST_CASE("kernel selection can be forced") {
  CHECK(kernels::select("scalar"));
  CHECK(std::string(kernels::active().name) == "scalar");
  CHECK_FALSE(kernels::select("neon"));
  if (kernels::avx2_table()) {
    CHECK(kernels::select("avx2"));
    CHECK(std::string(kernels::active().name) == "avx2");
  } else {
    kernels::select("scalar");
  }
}

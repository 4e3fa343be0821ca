#include <atomic>
#include <cstdlib>
#include <string_view>

#include "homest/kernels.hpp"
#include "kernels_impl.hpp"

namespace homest::kernels {
namespace {

const KernelTable kScalar{"scalar", scalar::dot, scalar::weighted_dot,
                          scalar::weighted_gram, scalar::clamped_reciprocal};

#if defined(HOMEST_HAVE_AVX2)
const KernelTable kAvx2{"avx2", avx2::dot, avx2::weighted_dot, avx2::weighted_gram,
                        avx2::clamped_reciprocal};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* detect() {
  if (const char* env = std::getenv("HOMEST_SIMD")) {
    if (std::string_view(env) == "scalar") return &kScalar;
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{detect()};
  return current;
}

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(HOMEST_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(std::string_view name) {
  if (name == "scalar") {
    slot().store(&kScalar, std::memory_order_release);
    return true;
  }
  if (name == "avx2") {
    if (const KernelTable* t = avx2_table()) {
      slot().store(t, std::memory_order_release);
      return true;
    }
  }
  return false;
}

}  // namespace homest::kernels

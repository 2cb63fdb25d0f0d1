#include <cstdlib>
#include <string_view>

#include "sslab/simd/kernels.hpp"

namespace sslab::simd {

#if defined(SSLAB_HAVE_AVX2)
const KernelSet& avx2_kernel_set();
#endif

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::avx2:
      return "avx2";
    case Isa::scalar:
      break;
  }
  return "scalar";
}

const KernelSet* avx2_kernels() {
#if defined(SSLAB_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_kernel_set() : nullptr;
#else
  return nullptr;
#endif
}

const KernelSet& active_kernels() {
  static const KernelSet* chosen = [] {
    const char* env = std::getenv("SSLAB_SIMD");
    if (env && std::string_view(env) == "scalar") return &scalar_kernels();
    const KernelSet* wide = avx2_kernels();
    return wide ? wide : &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace sslab::simd

#include "fwnet/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

#if defined(__x86_64__) || defined(__i386__)
#include <cpuid.h>
#define FWNET_X86 1
#endif

namespace fwnet::kernels {

bool avx2_supported() {
#ifdef FWNET_X86
  static const bool ok = [] {
    unsigned eax, ebx, ecx, edx;
    if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return false;
    bool avx2 = (ebx & (1u << 5)) != 0;
    if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return false;
    bool fma = (ecx & (1u << 12)) != 0;
    bool osxsave = (ecx & (1u << 27)) != 0;
    return avx2 && fma && osxsave;
  }();
  return ok;
#else
  return false;
#endif
}

namespace {

Backend initial_backend() {
  if (const char* env = std::getenv("FWNET_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0) {
      if (!avx2_supported()) throw std::runtime_error("FWNET_SIMD=avx2: CPU lacks AVX2/FMA");
      return Backend::avx2;
    }
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported())
    throw std::runtime_error("set_backend: CPU lacks AVX2/FMA");
  backend_slot().store(b, std::memory_order_relaxed);
}

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

#define FWNET_DISPATCH(fn, ...)                     \
  do {                                              \
    if (active_backend() == Backend::avx2)          \
      detail::fn##_avx2(__VA_ARGS__);               \
    else                                            \
      detail::fn##_scalar(__VA_ARGS__);             \
  } while (0)

void sgemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  FWNET_DISPATCH(sgemm_nn, m, n, k, a, b, c, acc);
}
void sgemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  FWNET_DISPATCH(sgemm_tn, m, n, k, a, b, c, acc);
}
void sgemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  FWNET_DISPATCH(sgemm_nt, m, n, k, a, b, c, acc);
}
void relu_forward(float* x, size_t n) { FWNET_DISPATCH(relu_forward, x, n); }
void relu_backward(const float* y, float* g, size_t n) { FWNET_DISPATCH(relu_backward, y, g, n); }
void sgd_momentum_update(float* w, float* buf, const float* g, size_t n, float lr,
                         float momentum) {
  FWNET_DISPATCH(sgd_momentum_update, w, buf, g, n, lr, momentum);
}
void add_inplace(float* y, const float* x, size_t n) { FWNET_DISPATCH(add_inplace, y, x, n); }
void scale_inplace(float* y, float a, size_t n) { FWNET_DISPATCH(scale_inplace, y, a, n); }
void warp_forward(const float* src, int c, int h, int w, const float* flow, float* dst) {
  FWNET_DISPATCH(warp_forward, src, c, h, w, flow, dst);
}

#undef FWNET_DISPATCH

}  // namespace fwnet::kernels

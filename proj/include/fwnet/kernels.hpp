#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops behind the tensor/network code. Every kernel has
// a scalar reference implementation; hot float32 paths additionally have an
// AVX2+FMA variant selected at runtime (see Backend). The two variants are
// equivalence-tested against each other in tests/test_kernels.cpp.
//
// Matrices are dense row-major with no leading-dimension padding.

namespace fwnet::kernels {

enum class Backend { scalar, avx2 };

bool avx2_supported();
/// Active backend: FWNET_SIMD env override ("scalar"/"avx2"), else the best
/// the CPU supports.
Backend active_backend();
/// Force a backend (tests). Throws if the CPU cannot run it.
void set_backend(Backend b);
const char* backend_name(Backend b);

// C[M,N] = A[M,K] * B[K,N]  (+C when accumulate)
void sgemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
// C[M,N] = A[K,M]^T * B[K,N]
void sgemm_tn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
// C[M,N] = A[M,K] * B[N,K]^T
void sgemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);

// double variants (reference only; used by the float64 network instantiation
// that backs the finite-difference gradient checks)
void dgemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
void dgemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);
void dgemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool accumulate);

void relu_forward(float* x, size_t n);
void relu_forward(double* x, size_t n);
// g *= (y > 0), where y is the forward output
void relu_backward(const float* y, float* g, size_t n);
void relu_backward(const double* y, double* g, size_t n);

// buf = momentum*buf + g; w -= lr*buf
void sgd_momentum_update(float* w, float* buf, const float* g, size_t n, float lr,
                         float momentum);

void add_inplace(float* y, const float* x, size_t n);
void add_inplace(double* y, const double* x, size_t n);
void scale_inplace(float* y, float a, size_t n);
void scale_inplace(double* y, double a, size_t n);

// Backward bilinear warp with zero padding outside the grid.
// src: (C,H,W); flow: (H,W,2) with (dx,dy) in pixels; dst: (C,H,W).
// dst(c, y, x) = sum_q K(q, (x,y)+flow(y,x)) * src(c, q)
// where K is the separable tent kernel max(0,1-|dx|)*max(0,1-|dy|).
void warp_forward(const float* src, int c, int h, int w, const float* flow, float* dst);
void warp_forward(const double* src, int c, int h, int w, const double* flow, double* dst);

// grad_src (accumulated into a zeroed buffer) and grad_flow (H,W,2).
// The tent-kernel derivative is taken piecewise and defined as 0 exactly at
// the kernel kinks (integer-aligned sample positions).
void warp_backward(const float* grad_out, const float* src, int c, int h, int w,
                   const float* flow, float* grad_src, float* grad_flow);
void warp_backward(const double* grad_out, const double* src, int c, int h, int w,
                   const double* flow, double* grad_src, double* grad_flow);

// generic dispatch by element type
template <typename T>
inline void gemm_nn(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
  if constexpr (sizeof(T) == sizeof(float))
    sgemm_nn(m, n, k, (const float*)a, (const float*)b, (float*)c, acc);
  else
    dgemm_nn(m, n, k, (const double*)a, (const double*)b, (double*)c, acc);
}
template <typename T>
inline void gemm_tn(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
  if constexpr (sizeof(T) == sizeof(float))
    sgemm_tn(m, n, k, (const float*)a, (const float*)b, (float*)c, acc);
  else
    dgemm_tn(m, n, k, (const double*)a, (const double*)b, (double*)c, acc);
}
template <typename T>
inline void gemm_nt(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
  if constexpr (sizeof(T) == sizeof(float))
    sgemm_nt(m, n, k, (const float*)a, (const float*)b, (float*)c, acc);
  else
    dgemm_nt(m, n, k, (const double*)a, (const double*)b, (double*)c, acc);
}

namespace detail {
// scalar reference implementations (always available; used as the dispatch
// fallback and directly by the equivalence tests)
void sgemm_nn_scalar(int m, int n, int k, const float* a, const float* b, float* c, bool acc);
void sgemm_tn_scalar(int m, int n, int k, const float* a, const float* b, float* c, bool acc);
void sgemm_nt_scalar(int m, int n, int k, const float* a, const float* b, float* c, bool acc);
void relu_forward_scalar(float* x, size_t n);
void relu_backward_scalar(const float* y, float* g, size_t n);
void sgd_momentum_update_scalar(float* w, float* buf, const float* g, size_t n, float lr,
                                float momentum);
void add_inplace_scalar(float* y, const float* x, size_t n);
void scale_inplace_scalar(float* y, float a, size_t n);
void warp_forward_scalar(const float* src, int c, int h, int w, const float* flow, float* dst);

// AVX2+FMA variants (compiled in kernels_avx2.cpp with target options; only
// callable when avx2_supported())
void sgemm_nn_avx2(int m, int n, int k, const float* a, const float* b, float* c, bool acc);
void sgemm_tn_avx2(int m, int n, int k, const float* a, const float* b, float* c, bool acc);
void sgemm_nt_avx2(int m, int n, int k, const float* a, const float* b, float* c, bool acc);
void relu_forward_avx2(float* x, size_t n);
void relu_backward_avx2(const float* y, float* g, size_t n);
void sgd_momentum_update_avx2(float* w, float* buf, const float* g, size_t n, float lr,
                              float momentum);
void add_inplace_avx2(float* y, const float* x, size_t n);
void scale_inplace_avx2(float* y, float a, size_t n);
void warp_forward_avx2(const float* src, int c, int h, int w, const float* flow, float* dst);
}  // namespace detail

}  // namespace fwnet::kernels

#include <cmath>
#include <cstddef>

#include "fwnet/kernels.hpp"
#include "fwnet/parallel.hpp"

// Reference implementations. These define the kernel semantics; the AVX2
// variants must agree with them to tight floating-point tolerance.

namespace fwnet::kernels {
namespace {

template <typename T>
void gemm_nn_ref(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
  parallel_for(m, 4, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      T* crow = c + i * n;
      const T* arow = a + i * k;
      if (!acc)
        for (int j = 0; j < n; ++j) crow[j] = T(0);
      for (int kk = 0; kk < k; ++kk) {
        T av = arow[kk];
        const T* brow = b + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

template <typename T>
void gemm_tn_ref(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
  // a is (k,m): c[i,j] = sum_kk a[kk,i] * b[kk,j]
  parallel_for(m, 4, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      T* crow = c + i * n;
      if (!acc)
        for (int j = 0; j < n; ++j) crow[j] = T(0);
      for (int kk = 0; kk < k; ++kk) {
        T av = a[static_cast<size_t>(kk) * m + i];
        const T* brow = b + static_cast<size_t>(kk) * n;
        for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  });
}

template <typename T>
void gemm_nt_ref(int m, int n, int k, const T* a, const T* b, T* c, bool acc) {
  // b is (n,k): c[i,j] = dot(a_row_i, b_row_j)
  parallel_for(m, 2, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const T* arow = a + i * k;
      T* crow = c + i * n;
      for (int j = 0; j < n; ++j) {
        const T* brow = b + static_cast<size_t>(j) * k;
        T s = 0;
        for (int kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
        crow[j] = acc ? crow[j] + s : s;
      }
    }
  });
}

template <typename T>
void warp_forward_ref(const T* src, int c, int h, int w, const T* flow, T* dst) {
  const size_t plane = static_cast<size_t>(h) * w;
  parallel_for(h, 16, [&](int64_t y0, int64_t y1) {
    for (int64_t y = y0; y < y1; ++y) {
      for (int x = 0; x < w; ++x) {
        const size_t p = static_cast<size_t>(y) * w + x;
        const T sx = static_cast<T>(x) + flow[2 * p];
        const T sy = static_cast<T>(y) + flow[2 * p + 1];
        const int x0 = static_cast<int>(std::floor(sx));
        const int y0i = static_cast<int>(std::floor(sy));
        const T fx = sx - static_cast<T>(x0);
        const T fy = sy - static_cast<T>(y0i);
        const bool vx0 = x0 >= 0 && x0 < w, vx1 = x0 + 1 >= 0 && x0 + 1 < w;
        const bool vy0 = y0i >= 0 && y0i < h, vy1 = y0i + 1 >= 0 && y0i + 1 < h;
        const T w00 = (T(1) - fx) * (T(1) - fy);
        const T w01 = fx * (T(1) - fy);
        const T w10 = (T(1) - fx) * fy;
        const T w11 = fx * fy;
        for (int ch = 0; ch < c; ++ch) {
          const T* plane_src = src + ch * plane;
          T v = 0;
          if (vy0) {
            if (vx0) v += w00 * plane_src[static_cast<size_t>(y0i) * w + x0];
            if (vx1) v += w01 * plane_src[static_cast<size_t>(y0i) * w + x0 + 1];
          }
          if (vy1) {
            if (vx0) v += w10 * plane_src[static_cast<size_t>(y0i + 1) * w + x0];
            if (vx1) v += w11 * plane_src[static_cast<size_t>(y0i + 1) * w + x0 + 1];
          }
          dst[ch * plane + p] = v;
        }
      }
    }
  });
}

// Chain rule of the tent kernel K(q, p+dp) w.r.t. source values and flow.
// The per-axis kernel derivative is +-1 on the open unit intervals and 0 at
// the kinks, so a sample that lands exactly on the grid gets zero flow
// gradient on that axis.
template <typename T>
void warp_backward_ref(const T* grad_out, const T* src, int c, int h, int w, const T* flow,
                       T* grad_src, T* grad_flow) {
  const size_t plane = static_cast<size_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t p = static_cast<size_t>(y) * w + x;
      const T sx = static_cast<T>(x) + flow[2 * p];
      const T sy = static_cast<T>(y) + flow[2 * p + 1];
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const T fx = sx - static_cast<T>(x0);
      const T fy = sy - static_cast<T>(y0);
      const bool vx0 = x0 >= 0 && x0 < w, vx1 = x0 + 1 >= 0 && x0 + 1 < w;
      const bool vy0 = y0 >= 0 && y0 < h, vy1 = y0 + 1 >= 0 && y0 + 1 < h;
      const T w00 = (T(1) - fx) * (T(1) - fy);
      const T w01 = fx * (T(1) - fy);
      const T w10 = (T(1) - fx) * fy;
      const T w11 = fx * fy;
      T gx = 0, gy = 0;
      for (int ch = 0; ch < c; ++ch) {
        const T go = grad_out[ch * plane + p];
        const T* sp = src + ch * plane;
        T* gs = grad_src + ch * plane;
        T v00 = 0, v01 = 0, v10 = 0, v11 = 0;
        if (vy0) {
          if (vx0) {
            v00 = sp[static_cast<size_t>(y0) * w + x0];
            gs[static_cast<size_t>(y0) * w + x0] += go * w00;
          }
          if (vx1) {
            v01 = sp[static_cast<size_t>(y0) * w + x0 + 1];
            gs[static_cast<size_t>(y0) * w + x0 + 1] += go * w01;
          }
        }
        if (vy1) {
          if (vx0) {
            v10 = sp[static_cast<size_t>(y0 + 1) * w + x0];
            gs[static_cast<size_t>(y0 + 1) * w + x0] += go * w10;
          }
          if (vx1) {
            v11 = sp[static_cast<size_t>(y0 + 1) * w + x0 + 1];
            gs[static_cast<size_t>(y0 + 1) * w + x0 + 1] += go * w11;
          }
        }
        if (fx != T(0)) gx += go * ((v01 - v00) * (T(1) - fy) + (v11 - v10) * fy);
        if (fy != T(0)) gy += go * ((v10 - v00) * (T(1) - fx) + (v11 - v01) * fx);
      }
      grad_flow[2 * p] = gx;
      grad_flow[2 * p + 1] = gy;
    }
  }
}

}  // namespace

namespace detail {

void sgemm_nn_scalar(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  gemm_nn_ref(m, n, k, a, b, c, acc);
}
void sgemm_tn_scalar(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  gemm_tn_ref(m, n, k, a, b, c, acc);
}
void sgemm_nt_scalar(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  gemm_nt_ref(m, n, k, a, b, c, acc);
}
void relu_forward_scalar(float* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = x[i] > 0.f ? x[i] : 0.f;
}
void relu_backward_scalar(const float* y, float* g, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (y[i] <= 0.f) g[i] = 0.f;
}
void sgd_momentum_update_scalar(float* w, float* buf, const float* g, size_t n, float lr,
                                float momentum) {
  for (size_t i = 0; i < n; ++i) {
    buf[i] = momentum * buf[i] + g[i];
    w[i] -= lr * buf[i];
  }
}
void add_inplace_scalar(float* y, const float* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += x[i];
}
void scale_inplace_scalar(float* y, float a, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] *= a;
}
void warp_forward_scalar(const float* src, int c, int h, int w, const float* flow, float* dst) {
  warp_forward_ref(src, c, h, w, flow, dst);
}

}  // namespace detail

void dgemm_nn(int m, int n, int k, const double* a, const double* b, double* c, bool acc) {
  gemm_nn_ref(m, n, k, a, b, c, acc);
}
void dgemm_tn(int m, int n, int k, const double* a, const double* b, double* c, bool acc) {
  gemm_tn_ref(m, n, k, a, b, c, acc);
}
void dgemm_nt(int m, int n, int k, const double* a, const double* b, double* c, bool acc) {
  gemm_nt_ref(m, n, k, a, b, c, acc);
}
void relu_forward(double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
}
void relu_backward(const double* y, double* g, size_t n) {
  for (size_t i = 0; i < n; ++i)
    if (y[i] <= 0.0) g[i] = 0.0;
}
void add_inplace(double* y, const double* x, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += x[i];
}
void scale_inplace(double* y, double a, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] *= a;
}
void warp_forward(const double* src, int c, int h, int w, const double* flow, double* dst) {
  warp_forward_ref(src, c, h, w, flow, dst);
}
void warp_backward(const float* grad_out, const float* src, int c, int h, int w,
                   const float* flow, float* grad_src, float* grad_flow) {
  warp_backward_ref(grad_out, src, c, h, w, flow, grad_src, grad_flow);
}
void warp_backward(const double* grad_out, const double* src, int c, int h, int w,
                   const double* flow, double* grad_src, double* grad_flow) {
  warp_backward_ref(grad_out, src, c, h, w, flow, grad_src, grad_flow);
}

}  // namespace fwnet::kernels

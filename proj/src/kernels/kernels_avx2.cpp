#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "fwnet/kernels.hpp"
#include "fwnet/parallel.hpp"

// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma;
// nothing here may be called unless avx2_supported() (see dispatch.cpp).

namespace fwnet::kernels::detail {

namespace {

constexpr int kJB = 32;  // output columns per register block (4 ymm)

// C[i, jb..jb+31] accumulated in registers over the full k loop. B rows for a
// j-block stay hot in L2 across the i loop.
void sgemm_nn_block(int m, int n, int k, const float* a, const float* b, float* c, bool acc,
                    int j) {
  for (int i = 0; i < m; ++i) {
    const float* arow = a + static_cast<size_t>(i) * k;
    float* crow = c + static_cast<size_t>(i) * n + j;
    __m256 c0, c1, c2, c3;
    if (acc) {
      c0 = _mm256_loadu_ps(crow + 0);
      c1 = _mm256_loadu_ps(crow + 8);
      c2 = _mm256_loadu_ps(crow + 16);
      c3 = _mm256_loadu_ps(crow + 24);
    } else {
      c0 = c1 = c2 = c3 = _mm256_setzero_ps();
    }
    for (int kk = 0; kk < k; ++kk) {
      const __m256 av = _mm256_broadcast_ss(arow + kk);
      const float* brow = b + static_cast<size_t>(kk) * n + j;
      c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 0), c0);
      c1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 8), c1);
      c2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 16), c2);
      c3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 24), c3);
    }
    _mm256_storeu_ps(crow + 0, c0);
    _mm256_storeu_ps(crow + 8, c1);
    _mm256_storeu_ps(crow + 16, c2);
    _mm256_storeu_ps(crow + 24, c3);
  }
}

// same block kernel with A addressed as (k,m)
void sgemm_tn_block(int m, int n, int k, const float* a, const float* b, float* c, bool acc,
                    int j) {
  for (int i = 0; i < m; ++i) {
    float* crow = c + static_cast<size_t>(i) * n + j;
    __m256 c0, c1, c2, c3;
    if (acc) {
      c0 = _mm256_loadu_ps(crow + 0);
      c1 = _mm256_loadu_ps(crow + 8);
      c2 = _mm256_loadu_ps(crow + 16);
      c3 = _mm256_loadu_ps(crow + 24);
    } else {
      c0 = c1 = c2 = c3 = _mm256_setzero_ps();
    }
    for (int kk = 0; kk < k; ++kk) {
      const __m256 av = _mm256_broadcast_ss(a + static_cast<size_t>(kk) * m + i);
      const float* brow = b + static_cast<size_t>(kk) * n + j;
      c0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 0), c0);
      c1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 8), c1);
      c2 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 16), c2);
      c3 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 24), c3);
    }
    _mm256_storeu_ps(crow + 0, c0);
    _mm256_storeu_ps(crow + 8, c1);
    _mm256_storeu_ps(crow + 16, c2);
    _mm256_storeu_ps(crow + 24, c3);
  }
}

template <bool Transposed>
void gemm_colmajor_tail(int m, int n, int k, const float* a, const float* b, float* c, bool acc,
                        int j0, int j1) {
  for (int i = 0; i < m; ++i) {
    for (int j = j0; j < j1; ++j) {
      float s = acc ? c[static_cast<size_t>(i) * n + j] : 0.f;
      for (int kk = 0; kk < k; ++kk) {
        const float av =
            Transposed ? a[static_cast<size_t>(kk) * m + i] : a[static_cast<size_t>(i) * k + kk];
        s += av * b[static_cast<size_t>(kk) * n + j];
      }
      c[static_cast<size_t>(i) * n + j] = s;
    }
  }
}

int64_t block_grain(int m, int k) {
  // aim for ~0.5 MFLOP per task
  const int64_t flops_per_block = 2ll * m * k * kJB + 1;
  return std::max<int64_t>(1, (1ll << 19) / flops_per_block);
}

float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
  lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
  return _mm_cvtss_f32(lo);
}

}  // namespace

void sgemm_nn_avx2(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  const int nblocks = n / kJB;
  parallel_for(nblocks, block_grain(m, k), [&](int64_t b0, int64_t b1) {
    for (int64_t blk = b0; blk < b1; ++blk)
      sgemm_nn_block(m, n, k, a, b, c, acc, static_cast<int>(blk) * kJB);
  });
  if (n % kJB) gemm_colmajor_tail<false>(m, n, k, a, b, c, acc, nblocks * kJB, n);
}

void sgemm_tn_avx2(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  const int nblocks = n / kJB;
  parallel_for(nblocks, block_grain(m, k), [&](int64_t b0, int64_t b1) {
    for (int64_t blk = b0; blk < b1; ++blk)
      sgemm_tn_block(m, n, k, a, b, c, acc, static_cast<int>(blk) * kJB);
  });
  if (n % kJB) gemm_colmajor_tail<true>(m, n, k, a, b, c, acc, nblocks * kJB, n);
}

void sgemm_nt_avx2(int m, int n, int k, const float* a, const float* b, float* c, bool acc) {
  // row-by-row dot products; the k loop is typically the long axis here
  parallel_for(n, std::max<int64_t>(1, (1 << 19) / (2 * k + 1)), [&](int64_t j0, int64_t j1) {
    for (int i = 0; i < m; ++i) {
      const float* arow = a + static_cast<size_t>(i) * k;
      for (int64_t j = j0; j < j1; ++j) {
        const float* brow = b + static_cast<size_t>(j) * k;
        __m256 s0 = _mm256_setzero_ps(), s1 = _mm256_setzero_ps();
        int kk = 0;
        for (; kk + 16 <= k; kk += 16) {
          s0 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + kk), _mm256_loadu_ps(brow + kk), s0);
          s1 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + kk + 8), _mm256_loadu_ps(brow + kk + 8), s1);
        }
        for (; kk + 8 <= k; kk += 8)
          s0 = _mm256_fmadd_ps(_mm256_loadu_ps(arow + kk), _mm256_loadu_ps(brow + kk), s0);
        float s = hsum(_mm256_add_ps(s0, s1));
        for (; kk < k; ++kk) s += arow[kk] * brow[kk];
        float* cp = c + static_cast<size_t>(i) * n + j;
        *cp = acc ? *cp + s : s;
      }
    }
  });
}

void relu_forward_avx2(float* x, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(x + i, _mm256_max_ps(_mm256_loadu_ps(x + i), zero));
  for (; i < n; ++i) x[i] = x[i] > 0.f ? x[i] : 0.f;
}

void relu_backward_avx2(const float* y, float* g, size_t n) {
  const __m256 zero = _mm256_setzero_ps();
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 mask = _mm256_cmp_ps(_mm256_loadu_ps(y + i), zero, _CMP_GT_OQ);
    _mm256_storeu_ps(g + i, _mm256_and_ps(_mm256_loadu_ps(g + i), mask));
  }
  for (; i < n; ++i)
    if (y[i] <= 0.f) g[i] = 0.f;
}

void sgd_momentum_update_avx2(float* w, float* buf, const float* g, size_t n, float lr,
                              float momentum) {
  const __m256 vm = _mm256_set1_ps(momentum);
  const __m256 vlr = _mm256_set1_ps(lr);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 vb = _mm256_mul_ps(vm, _mm256_loadu_ps(buf + i));
    vb = _mm256_add_ps(vb, _mm256_loadu_ps(g + i));
    _mm256_storeu_ps(buf + i, vb);
    _mm256_storeu_ps(w + i, _mm256_sub_ps(_mm256_loadu_ps(w + i), _mm256_mul_ps(vlr, vb)));
  }
  for (; i < n; ++i) {
    buf[i] = momentum * buf[i] + g[i];
    w[i] -= lr * buf[i];
  }
}

void add_inplace_avx2(float* y, const float* x, size_t n) {
  size_t i = 0;
  for (; i + 8 <= n; i += 8)
    _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
  for (; i < n; ++i) y[i] += x[i];
}

void scale_inplace_avx2(float* y, float a, size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(y + i), va));
  for (; i < n; ++i) y[i] *= a;
}

namespace {

// one output pixel, reference semantics (tail path)
inline void warp_pixel(const float* src, int c, int h, int w, size_t plane, int x, int y,
                       float dx, float dy, float* dst) {
  const float sx = static_cast<float>(x) + dx;
  const float sy = static_cast<float>(y) + dy;
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const float fx = sx - static_cast<float>(x0);
  const float fy = sy - static_cast<float>(y0);
  const bool vx0 = x0 >= 0 && x0 < w, vx1 = x0 + 1 >= 0 && x0 + 1 < w;
  const bool vy0 = y0 >= 0 && y0 < h, vy1 = y0 + 1 >= 0 && y0 + 1 < h;
  const float w00 = (1.f - fx) * (1.f - fy), w01 = fx * (1.f - fy);
  const float w10 = (1.f - fx) * fy, w11 = fx * fy;
  const size_t p = static_cast<size_t>(y) * w + x;
  for (int ch = 0; ch < c; ++ch) {
    const float* sp = src + ch * plane;
    float v = 0.f;
    if (vy0) {
      if (vx0) v += w00 * sp[static_cast<size_t>(y0) * w + x0];
      if (vx1) v += w01 * sp[static_cast<size_t>(y0) * w + x0 + 1];
    }
    if (vy1) {
      if (vx0) v += w10 * sp[static_cast<size_t>(y0 + 1) * w + x0];
      if (vx1) v += w11 * sp[static_cast<size_t>(y0 + 1) * w + x0 + 1];
    }
    dst[ch * plane + p] = v;
  }
}

}  // namespace

void warp_forward_avx2(const float* src, int c, int h, int w, const float* flow, float* dst) {
  const size_t plane = static_cast<size_t>(h) * w;
  const __m256i stride2 = _mm256_setr_epi32(0, 2, 4, 6, 8, 10, 12, 14);
  const __m256 ones = _mm256_set1_ps(1.f);
  const __m256i neg1 = _mm256_set1_epi32(-1);
  const __m256i vw = _mm256_set1_epi32(w);
  const __m256i vh = _mm256_set1_epi32(h);
  const __m256i vwm1 = _mm256_set1_epi32(w - 1);

  parallel_for(h, 16, [&](int64_t yb, int64_t ye) {
    for (int64_t y = yb; y < ye; ++y) {
      const __m256 vy = _mm256_set1_ps(static_cast<float>(y));
      int x = 0;
      for (; x + 8 <= w; x += 8) {
        const size_t p = static_cast<size_t>(y) * w + x;
        const float* fp = flow + 2 * p;
        const __m256 dx = _mm256_i32gather_ps(fp, stride2, 4);
        const __m256 dy = _mm256_i32gather_ps(fp + 1, stride2, 4);
        const __m256 xs = _mm256_add_ps(_mm256_setr_ps(0, 1, 2, 3, 4, 5, 6, 7),
                                        _mm256_set1_ps(static_cast<float>(x)));
        const __m256 sx = _mm256_add_ps(xs, dx);
        const __m256 sy = _mm256_add_ps(vy, dy);
        const __m256 fx0 = _mm256_floor_ps(sx);
        const __m256 fy0 = _mm256_floor_ps(sy);
        const __m256i x0 = _mm256_cvtps_epi32(fx0);
        const __m256i y0 = _mm256_cvtps_epi32(fy0);
        const __m256 fx = _mm256_sub_ps(sx, fx0);
        const __m256 fy = _mm256_sub_ps(sy, fy0);
        const __m256 gx = _mm256_sub_ps(ones, fx);
        const __m256 gy = _mm256_sub_ps(ones, fy);
        const __m256 w00 = _mm256_mul_ps(gx, gy);
        const __m256 w01 = _mm256_mul_ps(fx, gy);
        const __m256 w10 = _mm256_mul_ps(gx, fy);
        const __m256 w11 = _mm256_mul_ps(fx, fy);

        const __m256i x1 = _mm256_sub_epi32(x0, neg1);  // x0 + 1
        const __m256i y1 = _mm256_sub_epi32(y0, neg1);
        const __m256i vx0 = _mm256_and_si256(_mm256_cmpgt_epi32(x0, neg1),
                                             _mm256_cmpgt_epi32(vw, x0));
        const __m256i vx1 = _mm256_and_si256(_mm256_cmpgt_epi32(x1, neg1),
                                             _mm256_cmpgt_epi32(vw, x1));
        const __m256i vy0m = _mm256_and_si256(_mm256_cmpgt_epi32(y0, neg1),
                                              _mm256_cmpgt_epi32(vh, y0));
        const __m256i vy1m = _mm256_and_si256(_mm256_cmpgt_epi32(y1, neg1),
                                              _mm256_cmpgt_epi32(vh, y1));
        const __m256 m00 = _mm256_castsi256_ps(_mm256_and_si256(vy0m, vx0));
        const __m256 m01 = _mm256_castsi256_ps(_mm256_and_si256(vy0m, vx1));
        const __m256 m10 = _mm256_castsi256_ps(_mm256_and_si256(vy1m, vx0));
        const __m256 m11 = _mm256_castsi256_ps(_mm256_and_si256(vy1m, vx1));

        // clamp indices so even masked-off lanes stay in the plane
        const __m256i zero = _mm256_setzero_si256();
        const __m256i cx0 = _mm256_min_epi32(_mm256_max_epi32(x0, zero), vwm1);
        const __m256i cx1 = _mm256_min_epi32(_mm256_max_epi32(x1, zero), vwm1);
        const __m256i cy0 = _mm256_min_epi32(_mm256_max_epi32(y0, zero),
                                             _mm256_set1_epi32(h - 1));
        const __m256i cy1 = _mm256_min_epi32(_mm256_max_epi32(y1, zero),
                                             _mm256_set1_epi32(h - 1));
        const __m256i i00 = _mm256_add_epi32(_mm256_mullo_epi32(cy0, vw), cx0);
        const __m256i i01 = _mm256_add_epi32(_mm256_mullo_epi32(cy0, vw), cx1);
        const __m256i i10 = _mm256_add_epi32(_mm256_mullo_epi32(cy1, vw), cx0);
        const __m256i i11 = _mm256_add_epi32(_mm256_mullo_epi32(cy1, vw), cx1);

        for (int ch = 0; ch < c; ++ch) {
          const float* sp = src + ch * plane;
          const __m256 z = _mm256_setzero_ps();
          const __m256 v00 = _mm256_mask_i32gather_ps(z, sp, i00, m00, 4);
          const __m256 v01 = _mm256_mask_i32gather_ps(z, sp, i01, m01, 4);
          const __m256 v10 = _mm256_mask_i32gather_ps(z, sp, i10, m10, 4);
          const __m256 v11 = _mm256_mask_i32gather_ps(z, sp, i11, m11, 4);
          // mul+add in the reference accumulation order (bitwise-equal results)
          __m256 v = _mm256_mul_ps(w00, v00);
          v = _mm256_add_ps(v, _mm256_mul_ps(w01, v01));
          v = _mm256_add_ps(v, _mm256_mul_ps(w10, v10));
          v = _mm256_add_ps(v, _mm256_mul_ps(w11, v11));
          _mm256_storeu_ps(dst + ch * plane + p, v);
        }
      }
      for (; x < w; ++x) {
        const size_t p = static_cast<size_t>(y) * w + x;
        warp_pixel(src, c, h, w, plane, x, static_cast<int>(y), flow[2 * p], flow[2 * p + 1],
                   dst);
      }
    }
  });
}

}  // namespace fwnet::kernels::detail

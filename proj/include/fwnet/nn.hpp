#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fwnet/kernels.hpp"
#include "fwnet/parallel.hpp"
#include "fwnet/rng.hpp"
#include "fwnet/tensor.hpp"

// Minimal layer zoo with explicit forward/backward passes. Weight gradients
// accumulate into ParamT::grad so a batch is a sequence of
// forward/backward calls followed by one optimizer step.

namespace fwnet::nn {

template <typename T>
struct ParamT {
  std::string name;
  TensorT<T> value;
  TensorT<T> grad;
  TensorT<T> momentum;

  void init_shape(std::string n, std::vector<int> shape) {
    name = std::move(n);
    value = TensorT<T>(shape);
    grad = TensorT<T>(shape);
    momentum = TensorT<T>(std::move(shape));
  }
  size_t numel() const { return value.numel(); }
};

inline int conv_out_size(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}
inline int deconv_out_size(int in, int k, int stride, int pad) {
  return (in - 1) * stride - 2 * pad + k;
}

/// Fan-in scaled uniform init: U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases 0.
template <typename T>
void init_uniform_fan_in(ParamT<T>& p, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  for (size_t i = 0; i < p.value.numel(); ++i)
    p.value[i] = static_cast<T>(rng.uniform(-bound, bound));
}

// ---------------------------------------------------------------------------
// im2col / col2im

template <typename T>
void im2col(const TensorT<T>& x, int k, int stride, int pad, TensorT<T>& col, int out_h,
            int out_w) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const int rows = c * k * k;
  const size_t on = static_cast<size_t>(out_h) * out_w;
  if (col.numel() != static_cast<size_t>(rows) * on) col = TensorT<T>({rows, (int)on});
  const T* xd = x.data();
  T* cd = col.data();
  parallel_for(rows, 8, [&](int64_t r0, int64_t r1) {
    for (int64_t r = r0; r < r1; ++r) {
      const int ch = static_cast<int>(r) / (k * k);
      const int ky = (static_cast<int>(r) / k) % k;
      const int kx = static_cast<int>(r) % k;
      const T* plane = xd + static_cast<size_t>(ch) * h * w;
      T* crow = cd + r * on;
      for (int oy = 0; oy < out_h; ++oy) {
        const int iy = oy * stride - pad + ky;
        T* dst = crow + static_cast<size_t>(oy) * out_w;
        if (iy < 0 || iy >= h) {
          for (int ox = 0; ox < out_w; ++ox) dst[ox] = T(0);
          continue;
        }
        const T* srow = plane + static_cast<size_t>(iy) * w;
        for (int ox = 0; ox < out_w; ++ox) {
          const int ix = ox * stride - pad + kx;
          dst[ox] = (ix >= 0 && ix < w) ? srow[ix] : T(0);
        }
      }
    }
  });
}

template <typename T>
void col2im(const TensorT<T>& col, int k, int stride, int pad, int out_h, int out_w,
            TensorT<T>& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  x.zero();
  const T* cd = col.data();
  T* xd = x.data();
  const size_t on = static_cast<size_t>(out_h) * out_w;
  // one worker per channel: the k*k rows of a channel overlap in x
  parallel_for(c, 1, [&](int64_t c0, int64_t c1) {
    for (int64_t ch = c0; ch < c1; ++ch) {
      T* plane = xd + static_cast<size_t>(ch) * h * w;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const T* crow = cd + ((static_cast<size_t>(ch) * k + ky) * k + kx) * on;
          for (int oy = 0; oy < out_h; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            T* srow = plane + static_cast<size_t>(iy) * w;
            const T* src = crow + static_cast<size_t>(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < w) srow[ix] += src[ox];
            }
          }
        }
    }
  });
}

// ---------------------------------------------------------------------------
// layers

template <typename T>
struct Conv2d {
  int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;
  ParamT<T> w;  // (out_ch, in_ch*k*k)
  ParamT<T> b;  // (out_ch)

  struct Cache {
    TensorT<T> input;
    TensorT<T> col;
    int out_h = 0, out_w = 0;
  };

  void init(const std::string& name, int in, int out, int ksize, int s, int p, Rng& rng) {
    in_ch = in;
    out_ch = out;
    k = ksize;
    stride = s;
    pad = p;
    w.init_shape(name + ".w", {out, in * ksize * ksize});
    b.init_shape(name + ".b", {out});
    init_uniform_fan_in(w, in * ksize * ksize, rng);
  }

  TensorT<T> forward(const TensorT<T>& x, Cache* cache) const {
    require(x.rank() == 3 && x.dim(0) == in_ch,
            w.name + ": expected " + std::to_string(in_ch) + " input channels, got " +
                x.shape_str());
    const int oh = conv_out_size(x.dim(1), k, stride, pad);
    const int ow = conv_out_size(x.dim(2), k, stride, pad);
    require(oh >= 1 && ow >= 1, w.name + ": input too small " + x.shape_str());
    TensorT<T> col;
    im2col(x, k, stride, pad, col, oh, ow);
    TensorT<T> y({out_ch, oh, ow});
    const int n = oh * ow;
    kernels::gemm_nn(out_ch, n, in_ch * k * k, w.value.data(), col.data(), y.data(), false);
    for (int c = 0; c < out_ch; ++c) {
      T* row = y.data() + static_cast<size_t>(c) * n;
      const T bias = b.value[c];
      for (int i = 0; i < n; ++i) row[i] += bias;
    }
    if (cache) {
      cache->input = x;
      cache->col = std::move(col);
      cache->out_h = oh;
      cache->out_w = ow;
    }
    return y;
  }

  TensorT<T> backward(const Cache& cache, const TensorT<T>& gy) {
    const int n = cache.out_h * cache.out_w;
    const int kk = in_ch * k * k;
    // dW += gy * col^T ; db += row sums
    kernels::gemm_nt(out_ch, kk, n, gy.data(), cache.col.data(), w.grad.data(), true);
    for (int c = 0; c < out_ch; ++c) {
      const T* row = gy.data() + static_cast<size_t>(c) * n;
      T s = 0;
      for (int i = 0; i < n; ++i) s += row[i];
      b.grad[c] += s;
    }
    // dX = col2im(W^T * gy)
    TensorT<T> colg({kk, n});
    kernels::gemm_tn(kk, n, out_ch, w.value.data(), gy.data(), colg.data(), false);
    TensorT<T> gx(cache.input.shape());
    col2im(colg, k, stride, pad, cache.out_h, cache.out_w, gx);
    return gx;
  }

  void params(std::vector<ParamT<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

/// Transposed convolution expressed through the conv primitives: the forward
/// pass is the data-gradient of a Conv2d with the same weights, and vice
/// versa. Weight layout (in_ch, out_ch*k*k).
template <typename T>
struct Deconv2d {
  int in_ch = 0, out_ch = 0, k = 1, stride = 1, pad = 0;
  ParamT<T> w;  // (in_ch, out_ch*k*k)
  ParamT<T> b;  // (out_ch)

  struct Cache {
    TensorT<T> input;
    int out_h = 0, out_w = 0;
  };

  void init(const std::string& name, int in, int out, int ksize, int s, int p, Rng& rng) {
    in_ch = in;
    out_ch = out;
    k = ksize;
    stride = s;
    pad = p;
    w.init_shape(name + ".w", {in, out * ksize * ksize});
    b.init_shape(name + ".b", {out});
    init_uniform_fan_in(w, in * ksize * ksize, rng);
  }

  TensorT<T> forward(const TensorT<T>& x, Cache* cache) const {
    require(x.rank() == 3 && x.dim(0) == in_ch,
            w.name + ": expected " + std::to_string(in_ch) + " input channels, got " +
                x.shape_str());
    const int ih = x.dim(1), iw = x.dim(2);
    const int oh = deconv_out_size(ih, k, stride, pad);
    const int ow = deconv_out_size(iw, k, stride, pad);
    const int n = ih * iw;
    const int kk = out_ch * k * k;
    TensorT<T> colg({kk, n});
    kernels::gemm_tn(kk, n, in_ch, w.value.data(), x.data(), colg.data(), false);
    TensorT<T> y({out_ch, oh, ow});
    col2im(colg, k, stride, pad, ih, iw, y);
    const size_t plane = static_cast<size_t>(oh) * ow;
    for (int c = 0; c < out_ch; ++c) {
      T* row = y.data() + c * plane;
      const T bias = b.value[c];
      for (size_t i = 0; i < plane; ++i) row[i] += bias;
    }
    if (cache) {
      cache->input = x;
      cache->out_h = oh;
      cache->out_w = ow;
    }
    return y;
  }

  TensorT<T> backward(const Cache& cache, const TensorT<T>& gy) {
    const int ih = cache.input.dim(1), iw = cache.input.dim(2);
    const int n = ih * iw;
    const int kk = out_ch * k * k;
    TensorT<T> col;
    im2col(gy, k, stride, pad, col, ih, iw);
    // dW += x * col^T
    kernels::gemm_nt(in_ch, kk, n, cache.input.data(), col.data(), w.grad.data(), true);
    const size_t plane = static_cast<size_t>(cache.out_h) * cache.out_w;
    for (int c = 0; c < out_ch; ++c) {
      const T* row = gy.data() + c * plane;
      T s = 0;
      for (size_t i = 0; i < plane; ++i) s += row[i];
      b.grad[c] += s;
    }
    // dX = W * col
    TensorT<T> gx({in_ch, ih, iw});
    kernels::gemm_nn(in_ch, n, kk, w.value.data(), col.data(), gx.data(), false);
    return gx;
  }

  void params(std::vector<ParamT<T>*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

/// 2x2 max pooling, stride 2. Ties resolve to the first element in scan
/// order so backward routing is deterministic.
template <typename T>
struct MaxPool2 {
  struct Cache {
    TensorT<uint8_t> argmax;  // 2 bits worth: 0..3 = (dy*2+dx)
    int in_h = 0, in_w = 0;
  };

  TensorT<T> forward(const TensorT<T>& x, Cache* cache) const {
    const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    require(h % 2 == 0 && w % 2 == 0, "maxpool: odd input size " + x.shape_str());
    const int oh = h / 2, ow = w / 2;
    TensorT<T> y({c, oh, ow});
    TensorT<uint8_t> arg({c, oh, ow});
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T best = x(ch, 2 * oy, 2 * ox);
          uint8_t bi = 0;
          for (int i = 1; i < 4; ++i) {
            const T v = x(ch, 2 * oy + (i >> 1), 2 * ox + (i & 1));
            if (v > best) {
              best = v;
              bi = static_cast<uint8_t>(i);
            }
          }
          y(ch, oy, ox) = best;
          arg(ch, oy, ox) = bi;
        }
    if (cache) {
      cache->argmax = std::move(arg);
      cache->in_h = h;
      cache->in_w = w;
    }
    return y;
  }

  TensorT<T> backward(const Cache& cache, const TensorT<T>& gy) const {
    const int c = gy.dim(0), oh = gy.dim(1), ow = gy.dim(2);
    TensorT<T> gx({c, cache.in_h, cache.in_w});
    for (int ch = 0; ch < c; ++ch)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const uint8_t i = cache.argmax(ch, oy, ox);
          gx(ch, 2 * oy + (i >> 1), 2 * ox + (i & 1)) = gy(ch, oy, ox);
        }
    return gx;
  }
};

template <typename T>
inline void relu_inplace(TensorT<T>& x) {
  kernels::relu_forward(x.data(), x.numel());
}

/// g *= (y > 0) where y is the relu output.
template <typename T>
inline void relu_backward_inplace(const TensorT<T>& y, TensorT<T>& g) {
  kernels::relu_backward(y.data(), g.data(), g.numel());
}

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
  require(a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat: spatial mismatch " + a.shape_str() + " vs " + b.shape_str());
  TensorT<T> out({a.dim(0) + b.dim(0), a.dim(1), a.dim(2)});
  std::copy(a.data(), a.data() + a.numel(), out.data());
  std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
  return out;
}

template <typename T>
std::pair<TensorT<T>, TensorT<T>> split_channels(const TensorT<T>& x, int first) {
  TensorT<T> a({first, x.dim(1), x.dim(2)});
  TensorT<T> b({x.dim(0) - first, x.dim(1), x.dim(2)});
  std::copy(x.data(), x.data() + a.numel(), a.data());
  std::copy(x.data() + a.numel(), x.data() + x.numel(), b.data());
  return {std::move(a), std::move(b)};
}

/// Channel softmax (numerically stable).
template <typename T>
TensorT<T> softmax_channels(const TensorT<T>& logits) {
  const int c = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
  TensorT<T> p(logits.shape());
  const size_t plane = static_cast<size_t>(h) * w;
  for (size_t i = 0; i < plane; ++i) {
    T mx = logits[i];
    for (int ch = 1; ch < c; ++ch) mx = std::max(mx, logits[ch * plane + i]);
    T sum = 0;
    for (int ch = 0; ch < c; ++ch) {
      const T e = std::exp(logits[ch * plane + i] - mx);
      p[ch * plane + i] = e;
      sum += e;
    }
    for (int ch = 0; ch < c; ++ch) p[ch * plane + i] /= sum;
  }
  return p;
}

}  // namespace fwnet::nn

#pragma once

#include "fwnet/tensor.hpp"

// Flow-guided warping: differentiable backward bilinear warping of feature
// maps by a flow field. The float instantiation is the training path; the
// double instantiation backs the finite-difference gradient checks.

namespace fwnet {

/// Per-pixel displacement grid, shape (H,W,2) interleaved (dx,dy).
///
/// Displacements are expressed in pixels of the flow's reference grid, whose
/// width is width() * resolution_scale. A flow with resolution_scale == 1 is
/// self-referenced (values in its own grid's pixels); a coarse flow predicted
/// at 1/64 resolution over 256x256 frames carries resolution_scale == 64 and
/// full-resolution pixel values. resize_flow() converts any flow to a
/// self-referenced one on a new grid.
template <typename T>
struct FlowFieldT {
  TensorT<T> data;
  T resolution_scale = T(1);

  FlowFieldT() = default;
  FlowFieldT(int h, int w) : data({h, w, 2}) {}

  static FlowFieldT constant(int h, int w, T dx, T dy) {
    FlowFieldT f(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        f.data[(static_cast<size_t>(y) * w + x) * 2] = dx;
        f.data[(static_cast<size_t>(y) * w + x) * 2 + 1] = dy;
      }
    return f;
  }

  int height() const { return data.rank() == 3 ? data.dim(0) : 0; }
  int width() const { return data.rank() == 3 ? data.dim(1) : 0; }
  T& dx(int y, int x) { return data[(static_cast<size_t>(y) * width() + x) * 2]; }
  T& dy(int y, int x) { return data[(static_cast<size_t>(y) * width() + x) * 2 + 1]; }
  T dx(int y, int x) const { return data[(static_cast<size_t>(y) * width() + x) * 2]; }
  T dy(int y, int x) const { return data[(static_cast<size_t>(y) * width() + x) * 2 + 1]; }
};

using FlowField = FlowFieldT<float>;

enum class BorderMode { zero_pad };

/// Out-of-grid samples contribute zero.
struct BorderPolicy {
  BorderMode mode = BorderMode::zero_pad;
};

/// dst(c,p) = sum_q K(q, p + flow(p)) * src(c,q), K the separable tent
/// kernel. Flow spatial size must equal the source spatial size and all flow
/// entries must be finite.
template <typename T>
TensorT<T> warp_features(const TensorT<T>& source, const FlowFieldT<T>& flow,
                         BorderPolicy border = {});

template <typename T>
struct WarpGrads {
  TensorT<T> source;    // dL/d(source), same shape as source
  FlowFieldT<T> flow;   // dL/d(flow), same grid as flow
};

/// Backward pass of warp_features. grad_source(q) accumulates
/// grad_output(p) * K(q, p+flow(p)); grad_flow(p) contracts grad_output with
/// the piecewise kernel derivative (0 exactly at kernel kinks).
template <typename T>
WarpGrads<T> warp_backward(const TensorT<T>& grad_output, const TensorT<T>& source,
                           const FlowFieldT<T>& flow, BorderPolicy border = {});

/// Bilinear (corner-aligned) resize of both displacement channels to the
/// target grid, with values rescaled into target-grid pixel units:
/// factor = target_extent / (source_extent * resolution_scale), per axis.
/// The result is self-referenced (resolution_scale == 1).
template <typename T>
FlowFieldT<T> resize_flow(const FlowFieldT<T>& flow, int target_height, int target_width);

/// Adjoint of resize_flow, for backpropagation through the resize:
/// given dL/d(resized) on the (th,tw) grid, returns dL/d(flow) on the
/// (source_h, source_w) grid of a flow with the given resolution_scale.
template <typename T>
FlowFieldT<T> resize_flow_backward(const FlowFieldT<T>& grad_resized, int source_height,
                                   int source_width, T resolution_scale);

extern template TensorT<float> warp_features<float>(const TensorT<float>&,
                                                    const FlowFieldT<float>&, BorderPolicy);
extern template TensorT<double> warp_features<double>(const TensorT<double>&,
                                                      const FlowFieldT<double>&, BorderPolicy);
extern template WarpGrads<float> warp_backward<float>(const TensorT<float>&,
                                                      const TensorT<float>&,
                                                      const FlowFieldT<float>&, BorderPolicy);
extern template WarpGrads<double> warp_backward<double>(const TensorT<double>&,
                                                        const TensorT<double>&,
                                                        const FlowFieldT<double>&, BorderPolicy);
extern template FlowFieldT<float> resize_flow<float>(const FlowFieldT<float>&, int, int);
extern template FlowFieldT<double> resize_flow<double>(const FlowFieldT<double>&, int, int);
extern template FlowFieldT<float> resize_flow_backward<float>(const FlowFieldT<float>&, int, int,
                                                              float);
extern template FlowFieldT<double> resize_flow_backward<double>(const FlowFieldT<double>&, int,
                                                                int, double);

}  // namespace fwnet

#include "fwnet/warp.hpp"

#include <cmath>

#include "fwnet/kernels.hpp"

namespace fwnet {

namespace {

template <typename T>
void check_warp_inputs(const TensorT<T>& source, const FlowFieldT<T>& flow) {
  require(source.rank() == 3, "warp: source must be (C,H,W), got " + source.shape_str());
  require(source.dim(0) >= 1 && source.dim(1) >= 1 && source.dim(2) >= 1,
          "warp: empty source " + source.shape_str());
  require(flow.data.rank() == 3 && flow.data.dim(2) == 2,
          "warp: flow must be (H,W,2), got " + flow.data.shape_str());
  require(flow.height() == source.dim(1) && flow.width() == source.dim(2),
          "warp: flow grid " + flow.data.shape_str() + " does not match source " +
              source.shape_str() + "; resize_flow first");
  require(flow.data.all_finite(), "warp: flow contains non-finite values");
}

}  // namespace

template <typename T>
TensorT<T> warp_features(const TensorT<T>& source, const FlowFieldT<T>& flow,
                         BorderPolicy border) {
  (void)border;  // zero_pad is the only mode
  check_warp_inputs(source, flow);
  TensorT<T> out(source.shape());
  kernels::warp_forward(source.data(), source.dim(0), source.dim(1), source.dim(2),
                        flow.data.data(), out.data());
  return out;
}

template <typename T>
WarpGrads<T> warp_backward(const TensorT<T>& grad_output, const TensorT<T>& source,
                           const FlowFieldT<T>& flow, BorderPolicy border) {
  (void)border;
  check_warp_inputs(source, flow);
  require(grad_output.same_shape(source),
          "warp_backward: grad_output " + grad_output.shape_str() + " does not match source " +
              source.shape_str());
  WarpGrads<T> g;
  g.source = TensorT<T>(source.shape());
  g.flow = FlowFieldT<T>(flow.height(), flow.width());
  g.flow.resolution_scale = flow.resolution_scale;
  kernels::warp_backward(grad_output.data(), source.data(), source.dim(0), source.dim(1),
                         source.dim(2), flow.data.data(), g.source.data(), g.flow.data.data());
  return g;
}

namespace {

// corner-aligned sample positions: x * (n_src-1)/(n_dst-1), degenerate axes
// pinned to 0
template <typename T>
inline T corner_coord(int i, int n_dst, int n_src) {
  if (n_dst <= 1 || n_src <= 1) return T(0);
  return static_cast<T>(i) * static_cast<T>(n_src - 1) / static_cast<T>(n_dst - 1);
}

}  // namespace

template <typename T>
FlowFieldT<T> resize_flow(const FlowFieldT<T>& flow, int target_height, int target_width) {
  require(flow.data.rank() == 3 && flow.data.dim(2) == 2,
          "resize_flow: flow must be (H,W,2), got " + flow.data.shape_str());
  require(target_height >= 1 && target_width >= 1, "resize_flow: target dims must be >= 1");
  const int sh = flow.height(), sw = flow.width();
  require(sh >= 1 && sw >= 1, "resize_flow: empty flow");

  const T fx = static_cast<T>(target_width) / (static_cast<T>(sw) * flow.resolution_scale);
  const T fy = static_cast<T>(target_height) / (static_cast<T>(sh) * flow.resolution_scale);

  FlowFieldT<T> out(target_height, target_width);
  out.resolution_scale = T(1);
  for (int y = 0; y < target_height; ++y) {
    const T sy = corner_coord<T>(y, target_height, sh);
    const int y0 = static_cast<int>(sy);
    const int y1 = y0 + 1 < sh ? y0 + 1 : y0;
    const T wy = sy - static_cast<T>(y0);
    for (int x = 0; x < target_width; ++x) {
      const T sx = corner_coord<T>(x, target_width, sw);
      const int x0 = static_cast<int>(sx);
      const int x1 = x0 + 1 < sw ? x0 + 1 : x0;
      const T wx = sx - static_cast<T>(x0);
      for (int ch = 0; ch < 2; ++ch) {
        const T v00 = flow.data[(static_cast<size_t>(y0) * sw + x0) * 2 + ch];
        const T v01 = flow.data[(static_cast<size_t>(y0) * sw + x1) * 2 + ch];
        const T v10 = flow.data[(static_cast<size_t>(y1) * sw + x0) * 2 + ch];
        const T v11 = flow.data[(static_cast<size_t>(y1) * sw + x1) * 2 + ch];
        const T v = (T(1) - wy) * ((T(1) - wx) * v00 + wx * v01) +
                    wy * ((T(1) - wx) * v10 + wx * v11);
        out.data[(static_cast<size_t>(y) * target_width + x) * 2 + ch] =
            v * (ch == 0 ? fx : fy);
      }
    }
  }
  return out;
}

template <typename T>
FlowFieldT<T> resize_flow_backward(const FlowFieldT<T>& grad_resized, int source_height,
                                   int source_width, T resolution_scale) {
  require(grad_resized.data.rank() == 3 && grad_resized.data.dim(2) == 2,
          "resize_flow_backward: grad must be (H,W,2)");
  require(source_height >= 1 && source_width >= 1, "resize_flow_backward: bad source dims");
  const int th = grad_resized.height(), tw = grad_resized.width();
  const T fx = static_cast<T>(tw) / (static_cast<T>(source_width) * resolution_scale);
  const T fy = static_cast<T>(th) / (static_cast<T>(source_height) * resolution_scale);

  FlowFieldT<T> grad(source_height, source_width);
  grad.resolution_scale = resolution_scale;
  for (int y = 0; y < th; ++y) {
    const T sy = corner_coord<T>(y, th, source_height);
    const int y0 = static_cast<int>(sy);
    const int y1 = y0 + 1 < source_height ? y0 + 1 : y0;
    const T wy = sy - static_cast<T>(y0);
    for (int x = 0; x < tw; ++x) {
      const T sx = corner_coord<T>(x, tw, source_width);
      const int x0 = static_cast<int>(sx);
      const int x1 = x0 + 1 < source_width ? x0 + 1 : x0;
      const T wx = sx - static_cast<T>(x0);
      for (int ch = 0; ch < 2; ++ch) {
        const T g = grad_resized.data[(static_cast<size_t>(y) * tw + x) * 2 + ch] *
                    (ch == 0 ? fx : fy);
        grad.data[(static_cast<size_t>(y0) * source_width + x0) * 2 + ch] +=
            (T(1) - wy) * (T(1) - wx) * g;
        grad.data[(static_cast<size_t>(y0) * source_width + x1) * 2 + ch] +=
            (T(1) - wy) * wx * g;
        grad.data[(static_cast<size_t>(y1) * source_width + x0) * 2 + ch] +=
            wy * (T(1) - wx) * g;
        grad.data[(static_cast<size_t>(y1) * source_width + x1) * 2 + ch] += wy * wx * g;
      }
    }
  }
  return grad;
}

template TensorT<float> warp_features<float>(const TensorT<float>&, const FlowFieldT<float>&,
                                             BorderPolicy);
template TensorT<double> warp_features<double>(const TensorT<double>&, const FlowFieldT<double>&,
                                               BorderPolicy);
template WarpGrads<float> warp_backward<float>(const TensorT<float>&, const TensorT<float>&,
                                               const FlowFieldT<float>&, BorderPolicy);
template WarpGrads<double> warp_backward<double>(const TensorT<double>&, const TensorT<double>&,
                                                 const FlowFieldT<double>&, BorderPolicy);
template FlowFieldT<float> resize_flow<float>(const FlowFieldT<float>&, int, int);
template FlowFieldT<double> resize_flow<double>(const FlowFieldT<double>&, int, int);
template FlowFieldT<float> resize_flow_backward<float>(const FlowFieldT<float>&, int, int, float);
template FlowFieldT<double> resize_flow_backward<double>(const FlowFieldT<double>&, int, int,
                                                         double);

}  // namespace fwnet

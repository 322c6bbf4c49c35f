#include "fwnet/labelgen.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fwnet/image.hpp"

namespace fwnet::label {

void VesselnessConfig::validate() const {
  require(!scales.empty(), "vesselness: scales must be non-empty");
  for (float s : scales) require(s > 0, "vesselness: scales must be positive");
  require(beta > 0, "vesselness: beta must be positive");
  require(c >= 0, "vesselness: c must be >= 0");
}

TensorT<float> gaussian_blur(const TensorT<float>& image, float sigma) {
  require(image.rank() == 2, "gaussian_blur: expected (H,W)");
  const int h = image.dim(0), w = image.dim(1);
  const int radius = std::max(1, static_cast<int>(std::ceil(3.f * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  float sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5f * i * i / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& k : kernel) k /= sum;

  TensorT<float> tmp({h, w}), out({h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * image(y, std::clamp(x + i, 0, w - 1));
      tmp(y, x) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += kernel[i + radius] * tmp(std::clamp(y + i, 0, h - 1), x);
      out(y, x) = acc;
    }
  return out;
}

TensorT<float> vesselness(const Frame& frame, const VesselnessConfig& config) {
  config.validate();
  require(frame.data.rank() == 3 && (frame.channels() == 1 || frame.channels() == 3),
          "vesselness: frame must be (1|3,H,W)");
  Tensor gray3 = to_grayscale(frame.data);
  const int h = gray3.dim(1), w = gray3.dim(2);
  TensorT<float> gray({h, w});
  std::copy(gray3.data(), gray3.data() + gray.numel(), gray.data());

  TensorT<float> best({h, w});
  for (float sigma : config.scales) {
    auto smooth = gaussian_blur(gray, sigma);
    const float s2 = sigma * sigma;  // scale normalization

    // second derivatives by central differences, clamped borders
    auto at = [&](int y, int x) {
      return smooth(std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1));
    };
    // first find the per-image structureness maximum for the auto c
    TensorT<float> lam1({h, w}), lam2({h, w});
    float max_s = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float dxx = s2 * (at(y, x + 1) - 2 * at(y, x) + at(y, x - 1));
        const float dyy = s2 * (at(y + 1, x) - 2 * at(y, x) + at(y - 1, x));
        const float dxy = s2 * 0.25f *
                          (at(y + 1, x + 1) - at(y + 1, x - 1) - at(y - 1, x + 1) +
                           at(y - 1, x - 1));
        const float tr = dxx + dyy;
        const float disc = std::sqrt(std::max(0.f, (dxx - dyy) * (dxx - dyy) + 4 * dxy * dxy));
        float a = 0.5f * (tr + disc), b = 0.5f * (tr - disc);
        if (std::abs(a) > std::abs(b)) std::swap(a, b);  // |lam1| <= |lam2|
        lam1(y, x) = a;
        lam2(y, x) = b;
        max_s = std::max(max_s, std::sqrt(a * a + b * b));
      }
    const float c = config.c > 0 ? config.c : std::max(max_s * 0.5f, 1e-12f);

    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float l1 = lam1(y, x), l2 = lam2(y, x);
        if (l2 <= 0) continue;  // dark-on-bright ridges have positive lam2
        const float rb = l1 / l2;
        const float s = std::sqrt(l1 * l1 + l2 * l2);
        const float v = std::exp(-rb * rb / (2 * config.beta * config.beta)) *
                        (1.f - std::exp(-s * s / (2 * c * c)));
        if (v > best(y, x)) best(y, x) = v;
      }
  }

  if (config.normalize) {
    float mx = 0;
    for (size_t i = 0; i < best.numel(); ++i) mx = std::max(mx, best[i]);
    if (mx > 0)
      for (size_t i = 0; i < best.numel(); ++i) best[i] /= mx;
  }
  return best;
}

Mask adaptive_binarize(const TensorT<float>& response, int window, float offset, int min_area) {
  require(response.rank() == 2, "adaptive_binarize: expected (H,W)");
  require(window >= 3 && window % 2 == 1, "adaptive_binarize: window must be odd and >= 3");
  const int h = response.dim(0), w = response.dim(1);

  // local means via integral image, window clipped at borders
  std::vector<double> integral(static_cast<size_t>(h + 1) * (w + 1), 0.0);
  for (int y = 0; y < h; ++y) {
    double row = 0;
    for (int x = 0; x < w; ++x) {
      row += response(y, x);
      integral[static_cast<size_t>(y + 1) * (w + 1) + x + 1] =
          integral[static_cast<size_t>(y) * (w + 1) + x + 1] + row;
    }
  }
  auto box_sum = [&](int y0, int x0, int y1, int x1) {  // inclusive
    return integral[static_cast<size_t>(y1 + 1) * (w + 1) + x1 + 1] -
           integral[static_cast<size_t>(y0) * (w + 1) + x1 + 1] -
           integral[static_cast<size_t>(y1 + 1) * (w + 1) + x0] +
           integral[static_cast<size_t>(y0) * (w + 1) + x0];
  };

  Mask out;
  out.provenance = MaskProvenance::raw_pseudo_label;
  out.data = TensorT<uint8_t>({h, w});
  const int r = window / 2;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
      const double mean = box_sum(y0, x0, y1, x1) / ((y1 - y0 + 1) * (x1 - x0 + 1));
      out.data[static_cast<size_t>(y) * w + x] = response(y, x) > mean + offset ? 1 : 0;
    }

  // drop small components (8-connectivity)
  if (min_area > 1) {
    std::vector<int32_t> labels(static_cast<size_t>(h) * w, 0);
    std::vector<size_t> stack;
    int32_t next = 0;
    for (size_t start = 0; start < labels.size(); ++start) {
      if (!out.data[start] || labels[start]) continue;
      ++next;
      stack.assign(1, start);
      labels[start] = next;
      std::vector<size_t> members{start};
      while (!stack.empty()) {
        const size_t p = stack.back();
        stack.pop_back();
        const int py = static_cast<int>(p) / w, px = static_cast<int>(p) % w;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (!dy && !dx) continue;
            const int ny = py + dy, nx = px + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const size_t q = static_cast<size_t>(ny) * w + nx;
            if (out.data[q] && !labels[q]) {
              labels[q] = next;
              stack.push_back(q);
              members.push_back(q);
            }
          }
      }
      if (static_cast<int>(members.size()) < min_area)
        for (size_t q : members) out.data[q] = 0;
    }
  }
  return out;
}

std::vector<Mask> generate_raw_labels(const std::vector<Frame>& frames,
                                      const LabelGenConfig& config) {
  std::vector<Mask> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    auto response = vesselness(f, config.vesselness);
    out.push_back(adaptive_binarize(response, config.window, config.offset, config.min_area));
  }
  return out;
}

}  // namespace fwnet::label

#include "fwnet/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace fwnet {

Tensor read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw std::runtime_error("read_png: cannot read " + path.string() + ": " + img.message);

  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int c = color ? 3 : 1;
  const int h = static_cast<int>(img.height), w = static_cast<int>(img.width);
  std::vector<uint8_t> buf(static_cast<size_t>(PNG_IMAGE_SIZE(img)));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("read_png: decode failed for " + path.string());
  }

  Tensor out({c, h, w});
  const float inv = 1.f / 255.f;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch)
        out(ch, y, x) = buf[(static_cast<size_t>(y) * w + x) * c + ch] * inv;
  return out;
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  require(image.rank() == 3 && (image.dim(0) == 1 || image.dim(0) == 3),
          "write_png: image must be (1|3,H,W), got " + image.shape_str());
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<uint8_t> buf(static_cast<size_t>(c) * h * w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        float v = std::clamp(image(ch, y, x), 0.f, 1.f);
        buf[(static_cast<size_t>(y) * w + x) * c + ch] =
            static_cast<uint8_t>(std::lround(v * 255.f));
      }

  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = c == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error("write_png: cannot write " + path.string() + ": " + img.message);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
  require(mask.data.rank() == 2, "write_mask_png: mask must be (H,W)");
  const int h = mask.height(), w = mask.width();
  std::vector<uint8_t> buf(static_cast<size_t>(h) * w);
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = mask.data[i] ? 255 : 0;

  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(w);
  img.height = static_cast<png_uint_32>(h);
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buf.data(), 0, nullptr))
    throw std::runtime_error("write_mask_png: cannot write " + path.string());
}

Mask read_mask_png(const std::filesystem::path& path, MaskProvenance provenance) {
  Tensor img = read_png(path);
  Tensor gray = to_grayscale(img);
  Mask m;
  m.provenance = provenance;
  m.data = TensorT<uint8_t>({gray.dim(1), gray.dim(2)});
  for (size_t i = 0; i < m.data.numel(); ++i) m.data[i] = gray[i] > 0.5f ? 1 : 0;
  return m;
}

Tensor resize_bilinear(const Tensor& image, int target_height, int target_width) {
  require(image.rank() == 3, "resize_bilinear: image must be (C,H,W)");
  require(target_height >= 1 && target_width >= 1, "resize_bilinear: bad target size");
  const int c = image.dim(0), sh = image.dim(1), sw = image.dim(2);
  Tensor out({c, target_height, target_width});
  const float ry = static_cast<float>(sh) / target_height;
  const float rx = static_cast<float>(sw) / target_width;
  for (int y = 0; y < target_height; ++y) {
    float sy = (y + 0.5f) * ry - 0.5f;
    sy = std::clamp(sy, 0.f, static_cast<float>(sh - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, sh - 1);
    const float wy = sy - y0;
    for (int x = 0; x < target_width; ++x) {
      float sx = (x + 0.5f) * rx - 0.5f;
      sx = std::clamp(sx, 0.f, static_cast<float>(sw - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, sw - 1);
      const float wx = sx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const float v = (1.f - wy) * ((1.f - wx) * image(ch, y0, x0) + wx * image(ch, y0, x1)) +
                        wy * ((1.f - wx) * image(ch, y1, x0) + wx * image(ch, y1, x1));
        out(ch, y, x) = v;
      }
    }
  }
  return out;
}

Tensor to_grayscale(const Tensor& image) {
  require(image.rank() == 3, "to_grayscale: image must be (C,H,W)");
  if (image.dim(0) == 1) return image;
  require(image.dim(0) == 3, "to_grayscale: expected 1 or 3 channels");
  const int h = image.dim(1), w = image.dim(2);
  Tensor out({1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out(0, y, x) = 0.299f * image(0, y, x) + 0.587f * image(1, y, x) + 0.114f * image(2, y, x);
  return out;
}

const char* provenance_name(MaskProvenance p) {
  switch (p) {
    case MaskProvenance::clean_synthetic: return "clean_synthetic";
    case MaskProvenance::raw_pseudo_label: return "raw_pseudo_label";
    case MaskProvenance::manual: return "manual";
    case MaskProvenance::predicted: return "predicted";
  }
  return "unknown";
}

}  // namespace fwnet

#include "fwnet/synthdata.hpp"

#include <algorithm>
#include <cmath>

#include "fwnet/rng.hpp"

namespace fwnet::synth {

void SynthConfig::validate() const {
  require(num_frames >= 1, "synth: num_frames must be >= 1");
  require(image_size >= 32, "synth: image_size too small");
  require(curve_control_points >= 4, "synth: need >= 4 control points");
  require(curve_width_min > 0 && curve_width_max >= curve_width_min, "synth: bad width range");
  require(tip_advance_min >= 0 && tip_advance_max >= tip_advance_min,
          "synth: bad tip advance range");
  require(noise_sigma >= 0, "synth: noise_sigma must be >= 0");
  require(vessel_phantom_count >= 0, "synth: bad phantom count");
  require(contrast_min > 0 && contrast_max >= contrast_min, "synth: bad contrast range");
}

void NoiseConfig::validate() const {
  require(dilation_px >= 0 && erosion_px >= 0, "noise: morphology radii must be >= 0");
  require(dropout_fraction >= 0.f && dropout_fraction <= 1.f,
          "noise: dropout_fraction must be in [0,1]");
  require(false_positive_blobs >= 0, "noise: bad blob count");
}

namespace {

struct Vec2 {
  float x = 0, y = 0;
};

// Catmull-Rom through the control points, sampled into a dense polyline.
std::vector<Vec2> sample_spline(const std::vector<Vec2>& pts, int samples_per_segment) {
  std::vector<Vec2> out;
  const int n = static_cast<int>(pts.size());
  if (n < 2) return pts;
  auto at = [&](int i) { return pts[std::clamp(i, 0, n - 1)]; };
  for (int seg = 0; seg < n - 1; ++seg) {
    const Vec2 p0 = at(seg - 1), p1 = at(seg), p2 = at(seg + 1), p3 = at(seg + 2);
    for (int s = 0; s < samples_per_segment; ++s) {
      const float t = static_cast<float>(s) / samples_per_segment;
      const float t2 = t * t, t3 = t2 * t;
      Vec2 p;
      p.x = 0.5f * ((2 * p1.x) + (-p0.x + p2.x) * t +
                    (2 * p0.x - 5 * p1.x + 4 * p2.x - p3.x) * t2 +
                    (-p0.x + 3 * p1.x - 3 * p2.x + p3.x) * t3);
      p.y = 0.5f * ((2 * p1.y) + (-p0.y + p2.y) * t +
                    (2 * p0.y - 5 * p1.y + 4 * p2.y - p3.y) * t2 +
                    (-p0.y + 3 * p1.y - 3 * p2.y + p3.y) * t3);
      out.push_back(p);
    }
  }
  out.push_back(pts.back());
  return out;
}

// random smooth route across the image: a heading random-walk from a border
// entry point, kept inside a margin
std::vector<Vec2> random_route(Rng& rng, int size, int control_points, float step_scale) {
  const float margin = 0.08f * size;
  std::vector<Vec2> pts;
  Vec2 p{margin, static_cast<float>(rng.uniform(margin, size - margin))};
  float heading = static_cast<float>(rng.uniform(-0.5, 0.5));
  const float step = step_scale * size / control_points;
  pts.push_back(p);
  for (int i = 1; i < control_points; ++i) {
    heading += static_cast<float>(rng.uniform(-0.7, 0.7));
    float dx = step * std::cos(heading), dy = step * std::sin(heading);
    // reflect at the margins so the path keeps its length
    if (p.x + dx < margin || p.x + dx > size - margin) dx = -dx;
    if (p.y + dy < margin || p.y + dy > size - margin) dy = -dy;
    heading = std::atan2(dy, dx);
    p.x = std::clamp(p.x + dx, margin, size - margin);
    p.y = std::clamp(p.y + dy, margin, size - margin);
    pts.push_back(p);
  }
  return pts;
}

std::vector<float> arc_lengths(const std::vector<Vec2>& poly) {
  std::vector<float> acc(poly.size(), 0.f);
  for (size_t i = 1; i < poly.size(); ++i)
    acc[i] = acc[i - 1] + std::hypot(poly[i].x - poly[i - 1].x, poly[i].y - poly[i - 1].y);
  return acc;
}

float point_segment_dist2(float px, float py, Vec2 a, Vec2 b) {
  const float vx = b.x - a.x, vy = b.y - a.y;
  const float len2 = vx * vx + vy * vy;
  float t = len2 > 0 ? ((px - a.x) * vx + (py - a.y) * vy) / len2 : 0.f;
  t = std::clamp(t, 0.f, 1.f);
  const float dx = px - (a.x + t * vx), dy = py - (a.y + t * vy);
  return dx * dx + dy * dy;
}

// distance field to a polyline, computed over a banded neighborhood
void stamp_curve(TensorT<float>& dist2, const std::vector<Vec2>& poly, size_t first,
                 size_t last, float band) {
  const int h = dist2.dim(0), w = dist2.dim(1);
  for (size_t i = first; i + 1 <= last; ++i) {
    const Vec2 a = poly[i], b = poly[i + 1];
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - band)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + band)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - band)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + band)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const float d2 = point_segment_dist2(static_cast<float>(x), static_cast<float>(y), a, b);
        float& cur = dist2(y, x);
        if (d2 < cur) cur = d2;
      }
  }
}

TensorT<float> fresh_dist2(int size) {
  TensorT<float> d({size, size});
  d.fill(1e12f);
  return d;
}

// low-frequency texture: coarse white noise bilinearly upsampled
TensorT<float> low_freq_noise(Rng& rng, int size, int cells, float amplitude) {
  const int g = cells + 1;
  std::vector<float> grid(static_cast<size_t>(g) * g);
  for (auto& v : grid) v = rng.uniform_f(-amplitude, amplitude);
  TensorT<float> out({size, size});
  const float scale = static_cast<float>(cells) / size;
  for (int y = 0; y < size; ++y) {
    const float gy = y * scale;
    const int y0 = static_cast<int>(gy);
    const float fy = gy - y0;
    for (int x = 0; x < size; ++x) {
      const float gx = x * scale;
      const int x0 = static_cast<int>(gx);
      const float fx = gx - x0;
      const float v00 = grid[static_cast<size_t>(y0) * g + x0];
      const float v01 = grid[static_cast<size_t>(y0) * g + x0 + 1];
      const float v10 = grid[static_cast<size_t>(y0 + 1) * g + x0];
      const float v11 = grid[static_cast<size_t>(y0 + 1) * g + x0 + 1];
      out(y, x) = (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
    }
  }
  return out;
}

size_t index_at_arc(const std::vector<float>& acc, float s) {
  auto it = std::lower_bound(acc.begin(), acc.end(), s);
  return std::min<size_t>(acc.size() - 1, static_cast<size_t>(it - acc.begin()));
}

}  // namespace

Sequence generate_sequence(const SynthConfig& config, const std::string& sequence_id) {
  config.validate();
  Rng root(config.seed);
  Rng geo = root.stream("geometry");
  Rng bg = root.stream("background");

  const int size = config.image_size;
  const float width = geo.uniform_f(config.curve_width_min, config.curve_width_max);
  const float contrast = geo.uniform_f(config.contrast_min, config.contrast_max);

  // long route; the catheter occupies a growing arc of it
  auto control = random_route(geo, size, config.curve_control_points * 3, 2.2f);
  auto route = sample_spline(control, 24);
  auto acc = arc_lengths(route);
  const float total_len = acc.back();
  // cap the visible arc so foreground stays well under 5% of the pixels
  const float max_fg = 0.04f * size * size;
  const float max_len = std::min(total_len, max_fg / std::max(width, 1.f));
  float tip = std::min(0.45f * total_len, max_len * 0.6f);

  // static distractor curves, drawn into every frame
  std::vector<std::vector<Vec2>> phantoms;
  std::vector<float> phantom_width, phantom_contrast;
  for (int i = 0; i < config.vessel_phantom_count; ++i) {
    phantoms.push_back(
        sample_spline(random_route(bg, size, config.curve_control_points, 0.6f), 16));
    phantom_width.push_back(bg.uniform_f(1.2f, 2.2f));
    phantom_contrast.push_back(bg.uniform_f(0.12f, 0.3f) * contrast);
  }
  auto texture = low_freq_noise(bg, size, 8, 0.08f);

  Sequence seq;
  seq.id = sequence_id;
  seq.curve_width = width;
  seq.frames.reserve(config.num_frames);
  seq.clean_masks.reserve(config.num_frames);

  for (int f = 0; f < config.num_frames; ++f) {
    Rng frame_rng = root.stream("frame" + std::to_string(f));

    // lateral body wiggle: smooth in arc length, drifting phase
    const float phase = 0.35f * f + frame_rng.uniform_f(-0.05f, 0.05f);
    const float wavelen = 0.35f * total_len;
    std::vector<Vec2> body;
    const size_t tip_idx = index_at_arc(acc, tip);
    body.reserve(tip_idx + 1);
    for (size_t i = 0; i <= tip_idx; ++i) {
      Vec2 p = route[i];
      Vec2 tangent{1, 0};
      if (i + 1 < route.size()) {
        tangent.x = route[i + 1].x - route[i].x;
        tangent.y = route[i + 1].y - route[i].y;
        const float n = std::hypot(tangent.x, tangent.y);
        if (n > 0) {
          tangent.x /= n;
          tangent.y /= n;
        }
      }
      const float off = config.wiggle_amplitude *
                        std::sin(6.2831853f * acc[i] / wavelen + phase) *
                        (acc[i] / total_len);  // pinned at the entry point
      p.x += -tangent.y * off;
      p.y += tangent.x * off;
      body.push_back(p);
    }

    auto dist2 = fresh_dist2(size);
    stamp_curve(dist2, body, 0, body.size() - 1, width * 0.5f + 2.f);

    // exact rasterization of the analytic curve
    Mask mask;
    mask.provenance = MaskProvenance::clean_synthetic;
    mask.data = TensorT<uint8_t>({size, size});
    const float r = width * 0.5f;
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) mask.data[static_cast<size_t>(y) * size + x] =
          dist2(y, x) <= r * r ? 1 : 0;

    Frame frame;
    frame.sequence_id = sequence_id;
    frame.index = f;
    frame.data = Tensor({1, size, size});
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        float v = 0.78f + texture(y, x);
        // hard-edged dark catheter: the rendered extent matches the
        // rasterized mask exactly, so boundary labels are unambiguous
        if (dist2(y, x) <= r * r) v -= contrast;
        frame.data(0, y, x) = v;
      }
    // static distractors
    for (size_t ph = 0; ph < phantoms.size(); ++ph) {
      auto pd2 = fresh_dist2(size);
      stamp_curve(pd2, phantoms[ph], 0, phantoms[ph].size() - 1, phantom_width[ph] * 0.5f + 2.f);
      const float pr = phantom_width[ph] * 0.5f;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const float d = std::sqrt(pd2(y, x));
          if (d < pr + 0.5f) {
            const float t = std::clamp((pr + 0.5f - d), 0.f, 1.f);
            frame.data(0, y, x) -= phantom_contrast[ph] * t * t * (3.f - 2.f * t);
          }
        }
    }
    // per-frame sensor noise
    for (size_t i = 0; i < frame.data.numel(); ++i) {
      frame.data[i] = std::clamp(
          frame.data[i] + static_cast<float>(frame_rng.normal()) * config.noise_sigma, 0.f, 1.f);
    }

    seq.frames.push_back(std::move(frame));
    seq.clean_masks.push_back(std::move(mask));
    std::vector<std::array<float, 2>> pts;
    pts.reserve(body.size());
    for (const auto& p : body) pts.push_back({p.x, p.y});
    seq.curves.push_back(std::move(pts));

    tip = std::min(tip + frame_rng.uniform_f(config.tip_advance_min, config.tip_advance_max),
                   max_len);
  }
  return seq;
}

namespace {

Mask morph(const Mask& m, int radius, bool dilate_mode) {
  if (radius <= 0) return m;
  const int h = m.height(), w = m.width();
  Mask out;
  out.provenance = m.provenance;
  out.data = TensorT<uint8_t>({h, w});
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) offsets.emplace_back(dy, dx);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      uint8_t v = dilate_mode ? 0 : 1;
      for (auto [dy, dx] : offsets) {
        const int yy = y + dy, xx = x + dx;
        uint8_t s = 0;
        if (yy >= 0 && yy < h && xx >= 0 && xx < w)
          s = m.data[static_cast<size_t>(yy) * w + xx];
        if (dilate_mode) {
          if (s) {
            v = 1;
            break;
          }
        } else {
          if (!s) {
            v = 0;
            break;
          }
        }
      }
      out.data[static_cast<size_t>(y) * w + x] = v;
    }
  return out;
}

}  // namespace

Mask dilate(const Mask& m, int radius) { return morph(m, radius, true); }
Mask erode(const Mask& m, int radius) { return morph(m, radius, false); }

std::vector<Mask> corrupt_labels(const std::vector<Mask>& masks, const NoiseConfig& noise) {
  noise.validate();
  Rng root(noise.seed);
  std::vector<Mask> out;
  out.reserve(masks.size());
  for (size_t f = 0; f < masks.size(); ++f) {
    Rng rng = root.stream("corrupt" + std::to_string(f));
    Mask m = masks[f];
    if (noise.dilation_px > 0) m = dilate(m, noise.dilation_px);
    if (noise.erosion_px > 0) m = erode(m, noise.erosion_px);

    const int h = m.height(), w = m.width();
    if (noise.dropout_fraction > 0.f) {
      std::vector<size_t> fg;
      for (size_t i = 0; i < m.data.numel(); ++i)
        if (m.data[i]) fg.push_back(i);
      const size_t target = static_cast<size_t>(noise.dropout_fraction * fg.size());
      size_t removed = 0;
      int guard = 0;
      while (removed < target && guard++ < 10000 && !fg.empty()) {
        const size_t center = fg[rng.uniform_int(fg.size())];
        const int cy = static_cast<int>(center) / w, cx = static_cast<int>(center) % w;
        const int cr = rng.uniform_int(3, 8);
        for (int y = std::max(0, cy - cr); y <= std::min(h - 1, cy + cr); ++y)
          for (int x = std::max(0, cx - cr); x <= std::min(w - 1, cx + cr); ++x)
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= cr * cr) {
              uint8_t& px = m.data[static_cast<size_t>(y) * w + x];
              if (px) {
                px = 0;
                ++removed;
              }
            }
      }
    }

    for (int b = 0; b < noise.false_positive_blobs; ++b) {
      const int cy = rng.uniform_int(0, h - 1), cx = rng.uniform_int(0, w - 1);
      const int cr = rng.uniform_int(1, 3);
      for (int y = std::max(0, cy - cr); y <= std::min(h - 1, cy + cr); ++y)
        for (int x = std::max(0, cx - cr); x <= std::min(w - 1, cx + cr); ++x)
          if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= cr * cr)
            m.data[static_cast<size_t>(y) * w + x] = 1;
    }

    m.provenance = MaskProvenance::raw_pseudo_label;
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace fwnet::synth

#include "sgla/sequence.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "sgla/rng.hpp"

namespace sgla {

double iou(const PixelBox& a, const PixelBox& b) {
  const double iw = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double ih = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double center_error(const PixelBox& a, const PixelBox& b) { return std::hypot(a.cx() - b.cx(), a.cy() - b.cy()); }

void ScenarioParams::validate() const {
  if (frame_size < 16) throw std::invalid_argument("data.frame_size must be >= 16");
  if (!(target_size >= 4.0) || target_size > frame_size / 2.0) {
    throw std::invalid_argument("data.target_size must lie in [4, frame_size / 2]");
  }
  if (aspect_jitter < 0 || aspect_jitter >= 0.5) throw std::invalid_argument("data.aspect_jitter must lie in [0, 0.5)");
  if (speed < 0) throw std::invalid_argument("data.speed must be >= 0");
  if (scale_drift < 0) throw std::invalid_argument("data.scale_drift must be >= 0");
  if (distractors < 0) throw std::invalid_argument("data.distractors must be >= 0");
  if (noise < 0) throw std::invalid_argument("data.noise must be >= 0");
  for (const auto& [b, e] : occlusions) {
    if (b < 0 || e < b) throw std::invalid_argument("data.occlusion intervals must satisfy 0 <= begin <= end");
  }
}

namespace {

struct Rgb {
  float r, g, b;
};

Rgb random_colour(Rng& rng, float lo, float hi) {
  std::uniform_real_distribution<float> d(lo, hi);
  return {d(rng), d(rng), d(rng)};
}

/// Walker with constant speed and a smoothly turning heading, bouncing off
/// the frame margins.
struct Walker {
  double cx, cy, vx, vy;

  void step(Rng& rng, double speed, double half_w, double half_h, int frame) {
    if (speed > 0) {
      std::normal_distribution<double> turn(0.0, 0.25 * speed);
      vx += turn(rng);
      vy += turn(rng);
      const double norm = std::hypot(vx, vy);
      if (norm > 1e-9) {
        vx *= speed / norm;
        vy *= speed / norm;
      }
    }
    cx += vx;
    cy += vy;
    const double lo_x = half_w + 1, hi_x = frame - half_w - 1;
    const double lo_y = half_h + 1, hi_y = frame - half_h - 1;
    if (cx < lo_x) { cx = 2 * lo_x - cx; vx = std::abs(vx); }
    if (cx > hi_x) { cx = 2 * hi_x - cx; vx = -std::abs(vx); }
    if (cy < lo_y) { cy = 2 * lo_y - cy; vy = std::abs(vy); }
    if (cy > hi_y) { cy = 2 * hi_y - cy; vy = -std::abs(vy); }
    cx = std::clamp(cx, lo_x, std::max(lo_x, hi_x));
    cy = std::clamp(cy, lo_y, std::max(lo_y, hi_y));
  }
};

template <typename Fn>
void paint_box(Image& img, const PixelBox& box, Fn&& colour_at) {
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y)));
  const int x1 = std::min(img.width(), static_cast<int>(std::ceil(box.x + box.w)));
  const int y1 = std::min(img.height(), static_cast<int>(std::ceil(box.y + box.h)));
  for (int y = y0; y < y1; ++y) {
    const double v = (y + 0.5 - box.y) / box.h;
    if (v < 0 || v >= 1) continue;
    for (int x = x0; x < x1; ++x) {
      const double u = (x + 0.5 - box.x) / box.w;
      if (u < 0 || u >= 1) continue;
      const Rgb c = colour_at(u, v);
      img.at(y, x, 0) = c.r;
      img.at(y, x, 1) = c.g;
      img.at(y, x, 2) = c.b;
    }
  }
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

SyntheticSequence generate_sequence(std::uint64_t seed, int length, const ScenarioParams& params) {
  if (length < 2) throw std::invalid_argument("sequence length must be >= 2");
  params.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int f = params.frame_size;

  SyntheticSequence seq;
  seq.seed = seed;
  seq.params = params;
  seq.frames.reserve(static_cast<std::size_t>(length));
  seq.gt_boxes.reserve(static_cast<std::size_t>(length));

  // Background: base colour with a gentle linear gradient.
  const Rgb bg = random_colour(rng, 0.35f, 0.65f);
  const double gx = (unit(rng) - 0.5) * 0.2, gy = (unit(rng) - 0.5) * 0.2;

  // Target: two-colour checker texture.
  const Rgb ca = random_colour(rng, 0.0f, 1.0f);
  Rgb cb = random_colour(rng, 0.0f, 1.0f);
  if (std::abs(ca.r - cb.r) + std::abs(ca.g - cb.g) + std::abs(ca.b - cb.b) < 0.9f) {
    cb = {1.0f - ca.r, 1.0f - ca.g, 1.0f - ca.b};
  }
  const int cells = 2 + static_cast<int>(unit(rng) * 3.0);
  const double side = params.target_size * (0.85 + 0.3 * unit(rng));
  const double aspect = 1.0 + params.aspect_jitter * (2.0 * unit(rng) - 1.0);
  const double base_w = side * std::sqrt(aspect), base_h = side / std::sqrt(aspect);
  const double angle0 = unit(rng) * 2.0 * 3.141592653589793;
  Walker target{params.frame_size * (0.3 + 0.4 * unit(rng)), params.frame_size * (0.3 + 0.4 * unit(rng)),
                params.speed * std::cos(angle0), params.speed * std::sin(angle0)};
  double scale = 1.0;

  struct Distractor {
    Walker walker;
    double w, h;
    Rgb colour;
  };
  std::vector<Distractor> distractors;
  for (int d = 0; d < params.distractors; ++d) {
    const double a = unit(rng) * 2.0 * 3.141592653589793;
    const double dw = side * (0.7 + 0.6 * unit(rng)), dh = side * (0.7 + 0.6 * unit(rng));
    distractors.push_back({Walker{dw / 2 + 1 + unit(rng) * (f - dw - 2), dh / 2 + 1 + unit(rng) * (f - dh - 2),
                                  params.speed * std::cos(a), params.speed * std::sin(a)},
                           dw, dh, random_colour(rng, 0.1f, 0.9f)});
  }

  std::normal_distribution<double> pixel_noise(0.0, 1.0);
  for (int t = 0; t < length; ++t) {
    if (t > 0) {
      if (params.scale_drift > 0) {
        std::normal_distribution<double> drift(0.0, params.scale_drift);
        scale = std::clamp(scale * std::exp(drift(rng)), 0.7, 1.4);
      }
      target.step(rng, params.speed, base_w * scale / 2, base_h * scale / 2, f);
      for (auto& d : distractors) d.walker.step(rng, params.speed, d.w / 2, d.h / 2, f);
    }
    Image img(f, f);
    for (int y = 0; y < f; ++y) {
      for (int x = 0; x < f; ++x) {
        const double ramp = gx * (x - f / 2.0) / f + gy * (y - f / 2.0) / f;
        img.at(y, x, 0) = clamp01(bg.r + ramp + params.noise * pixel_noise(rng));
        img.at(y, x, 1) = clamp01(bg.g + ramp + params.noise * pixel_noise(rng));
        img.at(y, x, 2) = clamp01(bg.b + ramp + params.noise * pixel_noise(rng));
      }
    }
    for (const auto& d : distractors) {
      paint_box(img, PixelBox::from_center(d.walker.cx, d.walker.cy, d.w, d.h), [&](double, double) { return d.colour; });
    }
    const PixelBox box = PixelBox::from_center(target.cx, target.cy, base_w * scale, base_h * scale);
    paint_box(img, box, [&](double u, double v) {
      const int cu = static_cast<int>(u * cells), cv = static_cast<int>(v * cells);
      return ((cu + cv) % 2 == 0) ? ca : cb;
    });
    const bool occluded = std::any_of(params.occlusions.begin(), params.occlusions.end(),
                                      [t](const auto& iv) { return t >= iv.first && t < iv.second; });
    if (occluded) {
      paint_box(img, box, [&](double, double) { return bg; });
    }
    seq.frames.push_back(std::move(img));
    seq.gt_boxes.push_back(box);
  }
  return seq;
}

std::vector<SyntheticSequence> generate_suite(std::uint64_t seed, int count, int length, const ScenarioParams& base) {
  std::vector<SyntheticSequence> suite;
  suite.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    ScenarioParams p = base;
    p.speed = base.speed * (0.5 + 0.5 * (i % 3));
    p.scale_drift = base.scale_drift * (i % 2 == 0 ? 1.0 : 2.0);
    p.distractors = (base.distractors + i) % (base.distractors + 2);
    if (i % 5 == 4) p.occlusions.emplace_back(length / 2, length / 2 + 3);
    suite.push_back(generate_sequence(derive_seed(seed, 0, static_cast<std::uint64_t>(i)), length, p));
  }
  return suite;
}

SquareRegion context_region(const PixelBox& box, double context) {
  const double w = std::max(box.w, 2.0), h = std::max(box.h, 2.0);
  return {box.cx(), box.cy(), context * std::sqrt(w * h)};
}

BBox to_crop(const PixelBox& box, const SquareRegion& region) {
  const double x0 = region.center_x - region.side / 2, y0 = region.center_y - region.side / 2;
  return {(box.cx() - x0) / region.side, (box.cy() - y0) / region.side, box.w / region.side, box.h / region.side};
}

PixelBox from_crop(const BBox& box, const SquareRegion& region) {
  const double x0 = region.center_x - region.side / 2, y0 = region.center_y - region.side / 2;
  return PixelBox::from_center(x0 + box.cx * region.side, y0 + box.cy * region.side, box.w * region.side,
                               box.h * region.side);
}

Image crop_template(const Image& frame, const PixelBox& box, const CropSizes& sizes) {
  Image out;
  crop_resize(frame, context_region(box, sizes.template_context), sizes.template_size, frame.channel_mean(), out);
  return out;
}

SearchCrop crop_search(const Image& frame, const PixelBox& around, const CropSizes& sizes) {
  SearchCrop crop;
  crop.region = context_region(around, sizes.search_context);
  crop.padded_pixels = crop_resize(frame, crop.region, sizes.search_size, frame.channel_mean(), crop.image);
  return crop;
}

CropPair crop_pair(const Image& first_frame, const PixelBox& first_box, const Image& frame, const PixelBox& prev_box,
                   const PixelBox& gt, const CropSizes& sizes) {
  CropPair pair;
  pair.templ = crop_template(first_frame, first_box, sizes);
  SearchCrop s = crop_search(frame, prev_box, sizes);
  pair.search = std::move(s.image);
  pair.search_region = s.region;
  pair.padded_pixels = s.padded_pixels;
  pair.gt_in_crop = to_crop(gt, pair.search_region);
  return pair;
}

}  // namespace sgla

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sgla/head.hpp"
#include "sgla/image.hpp"

namespace sgla {

/// Axis-aligned box in frame pixels, top-left corner plus size (OTB layout).
struct PixelBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;

  double cx() const { return x + w / 2; }
  double cy() const { return y + h / 2; }

  static PixelBox from_center(double cx, double cy, double w, double h) { return {cx - w / 2, cy - h / 2, w, h}; }

  bool operator==(const PixelBox&) const = default;
};

double iou(const PixelBox& a, const PixelBox& b);
double center_error(const PixelBox& a, const PixelBox& b);

struct ScenarioParams {
  int frame_size = 128;
  double target_size = 20.0;  // initial side in pixels
  double aspect_jitter = 0.2;  // max relative deviation of w/h from 1
  double speed = 2.0;         // pixels per frame
  double scale_drift = 0.01;  // std of log-scale change per frame
  int distractors = 2;
  std::vector<std::pair<int, int>> occlusions;  // [begin, end) frame intervals
  double noise = 0.08;

  void validate() const;
};

struct SyntheticSequence {
  std::vector<Image> frames;
  std::vector<PixelBox> gt_boxes;
  std::uint64_t seed = 0;
  ScenarioParams params;

  std::size_t size() const { return frames.size(); }
};

/// Deterministic in (seed, length, params): a textured target on a smooth
/// random walk with scale drift, over noise, among flat distractor squares.
SyntheticSequence generate_sequence(std::uint64_t seed, int length, const ScenarioParams& params);

/// Fixed scenario suite derived from one seed; sequences vary speed, drift,
/// distractor count and occlusion.
std::vector<SyntheticSequence> generate_suite(std::uint64_t seed, int count, int length, const ScenarioParams& base);

struct CropSizes {
  int template_size = 32;
  int search_size = 64;
  double template_context = 2.0;
  double search_context = 4.0;
};

/// Square crop region of side context * sqrt(w * h) around the box centre.
SquareRegion context_region(const PixelBox& box, double context);

/// Frame box expressed in a crop's normalized coordinates, and back.
BBox to_crop(const PixelBox& box, const SquareRegion& region);
PixelBox from_crop(const BBox& box, const SquareRegion& region);

struct CropPair {
  Image templ;
  Image search;
  SquareRegion search_region;
  BBox gt_in_crop;
  int padded_pixels = 0;  // search crop pixels outside the frame
};

/// Template around `first_box` of `first_frame`, search around `prev_box`
/// of `frame`, and `gt` re-expressed in search-crop coordinates.
CropPair crop_pair(const Image& first_frame, const PixelBox& first_box, const Image& frame, const PixelBox& prev_box,
                   const PixelBox& gt, const CropSizes& sizes);

Image crop_template(const Image& frame, const PixelBox& box, const CropSizes& sizes);

struct SearchCrop {
  Image image;
  SquareRegion region;
  int padded_pixels = 0;
};

SearchCrop crop_search(const Image& frame, const PixelBox& around, const CropSizes& sizes);

}  // namespace sgla

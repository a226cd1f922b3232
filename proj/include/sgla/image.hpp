#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace sgla {

/// Interleaved H x W x 3 image, float channels in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, float fill = 0.0f)
      : height_(height), width_(width), pixels_(static_cast<std::size_t>(height) * width * 3, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  bool empty() const { return pixels_.empty(); }

  float& at(int y, int x, int c) { return pixels_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return pixels_[index(y, x, c)]; }

  const std::vector<float>& pixels() const { return pixels_; }
  std::vector<float>& pixels() { return pixels_; }

  std::array<float, 3> channel_mean() const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> pixels_;
};

/// Square axis-aligned region in source-pixel coordinates.
struct SquareRegion {
  double center_x;
  double center_y;
  double side;
};

/// Bilinearly resamples `region` of `src` to an out_size x out_size image.
/// Samples that fall outside the source take `pad`. Returns the number of
/// output pixels that were padded.
int crop_resize(const Image& src, const SquareRegion& region, int out_size, const std::array<float, 3>& pad,
                Image& out);

}  // namespace sgla

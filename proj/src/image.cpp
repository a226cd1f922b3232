#include "sgla/image.hpp"

#include <cmath>

namespace sgla {

std::array<float, 3> Image::channel_mean() const {
  std::array<double, 3> acc{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < pixels_.size(); ++i) acc[i % 3] += pixels_[i];
  const double n = static_cast<double>(height_) * width_;
  return {static_cast<float>(acc[0] / n), static_cast<float>(acc[1] / n), static_cast<float>(acc[2] / n)};
}

int crop_resize(const Image& src, const SquareRegion& region, int out_size, const std::array<float, 3>& pad,
                Image& out) {
  if (out.height() != out_size || out.width() != out_size) out = Image(out_size, out_size);
  const double step = region.side / out_size;
  const double x0 = region.center_x - region.side / 2.0;
  const double y0 = region.center_y - region.side / 2.0;
  int padded = 0;
  for (int oy = 0; oy < out_size; ++oy) {
    // Pixel centers: output pixel o covers [o, o+1) in crop units.
    const double sy = y0 + (oy + 0.5) * step - 0.5;
    for (int ox = 0; ox < out_size; ++ox) {
      const double sx = x0 + (ox + 0.5) * step - 0.5;
      if (sx < -0.5 || sy < -0.5 || sx > src.width() - 0.5 || sy > src.height() - 0.5) {
        for (int c = 0; c < 3; ++c) out.at(oy, ox, c) = pad[c];
        ++padded;
        continue;
      }
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const int xa = std::clamp(static_cast<int>(fx), 0, src.width() - 1);
      const int xb = std::clamp(static_cast<int>(fx) + 1, 0, src.width() - 1);
      const int ya = std::clamp(static_cast<int>(fy), 0, src.height() - 1);
      const int yb = std::clamp(static_cast<int>(fy) + 1, 0, src.height() - 1);
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - ax) * src.at(ya, xa, c) + ax * src.at(ya, xb, c);
        const double bottom = (1 - ax) * src.at(yb, xa, c) + ax * src.at(yb, xb, c);
        out.at(oy, ox, c) = static_cast<float>((1 - ay) * top + ay * bottom);
      }
    }
  }
  return padded;
}

}  // namespace sgla

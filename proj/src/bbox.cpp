#include <algorithm>

#include "sgla/head.hpp"

namespace sgla {

double iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1()));
  const double ih = std::max(0.0, std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1()));
  const double inter = iw * ih;
  const double uni = std::max(a.area(), 1e-12) + std::max(b.area(), 1e-12) - inter;
  return inter / uni;
}

double giou_loss(const BBox& pred, const BBox& gt) {
  const double iw = std::max(0.0, std::min(pred.x2(), gt.x2()) - std::max(pred.x1(), gt.x1()));
  const double ih = std::max(0.0, std::min(pred.y2(), gt.y2()) - std::max(pred.y1(), gt.y1()));
  const double inter = iw * ih;
  const double uni = std::max(pred.area(), 1e-12) + std::max(gt.area(), 1e-12) - inter;
  const double cw = std::max(pred.x2(), gt.x2()) - std::min(pred.x1(), gt.x1());
  const double ch = std::max(pred.y2(), gt.y2()) - std::min(pred.y1(), gt.y1());
  const double enclose = std::max(cw * ch, 1e-12);
  return 1.0 - (inter / uni - (enclose - uni) / enclose);
}

}  // namespace sgla

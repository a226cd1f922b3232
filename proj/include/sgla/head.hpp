#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "sgla/backbone.hpp"

namespace sgla {

/// Box as centre and size, normalized to the search image.
struct BBox {
  double cx = 0.5;
  double cy = 0.5;
  double w = 0.0;
  double h = 0.0;

  double x1() const { return cx - w / 2; }
  double y1() const { return cy - h / 2; }
  double x2() const { return cx + w / 2; }
  double y2() const { return cy + h / 2; }
  double area() const { return w * h; }

  bool operator==(const BBox&) const = default;
};

double iou(const BBox& a, const BBox& b);

/// 1 - GIoU; areas are floored at 1e-12.
double giou_loss(const BBox& pred, const BBox& gt);

struct LossWeights {
  double lambda_iou = 2.0;
  double lambda_l1 = 5.0;
  double gamma = 0.2;

  void validate() const {
    if (lambda_iou < 0 || lambda_l1 < 0 || gamma < 0) throw std::invalid_argument("loss weights must be >= 0");
  }
};

/// Combined objective: cls + lambda_iou * iou + lambda_l1 * l1 + gamma * sim.
template <typename Scalar>
Tensor<Scalar> total_loss(const Tensor<Scalar>& cls, const Tensor<Scalar>& iou_term, const Tensor<Scalar>& l1,
                          const Tensor<Scalar>& sim, const LossWeights& w) {
  Tensor<Scalar> out = add(cls, scale(iou_term, static_cast<Scalar>(w.lambda_iou)));
  out = add(out, scale(l1, static_cast<Scalar>(w.lambda_l1)));
  if (sim.defined()) out = add(out, scale(sim, static_cast<Scalar>(w.gamma)));
  return out;
}

inline double total_loss(double cls, double iou_term, double l1, double sim, const LossWeights& w) {
  return cls + w.lambda_iou * iou_term + w.lambda_l1 * l1 + w.gamma * sim;
}

/// Score map G x G, size and offset maps 2 x G x G, all in (0, 1).
template <typename Scalar>
struct HeadOutputs {
  Tensor<Scalar> score;
  Tensor<Scalar> size;
  Tensor<Scalar> offset;

  Index grid() const { return score.dim(0); }
};

/// Three 3x3 convolutions with channel halving and a sigmoid at the end.
template <typename Scalar>
struct ConvBranch {
  Linear<Scalar> conv1, conv2, conv3;  // weights are (9 * C_in) x C_out

  ConvBranch() = default;
  ConvBranch(Index in, Index channels, Index out, Rng& rng)
      : conv1(9 * in, channels, rng, std::sqrt(1.0 / (9.0 * in))),
        conv2(9 * channels, channels / 2, rng, std::sqrt(1.0 / (9.0 * channels))),
        conv3(9 * (channels / 2), out, rng, 0.01) {}

  Tensor<Scalar> operator()(const Tensor<Scalar>& x, Index grid) const {
    Tensor<Scalar> y = gelu(conv1(im2col3x3(x, grid, grid)));
    y = gelu(conv2(im2col3x3(y, grid, grid)));
    return sigmoid(conv3(im2col3x3(y, grid, grid)));
  }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    conv1.visit(prefix + ".conv1", f);
    conv2.visit(prefix + ".conv2", f);
    conv3.visit(prefix + ".conv3", f);
  }

  Index parameter_count() const { return conv1.parameter_count() + conv2.parameter_count() + conv3.parameter_count(); }
};

template <typename Scalar>
struct PredictionHead {
  ConvBranch<Scalar> score_branch, size_branch, offset_branch;

  PredictionHead() = default;
  PredictionHead(Index embed_dim, Index channels, Rng& rng)
      : score_branch(embed_dim, channels, 1, rng),
        size_branch(embed_dim, channels, 2, rng),
        offset_branch(embed_dim, channels, 2, rng) {}

  /// Search tokens (N_s x D, raster order) to score/size/offset maps.
  HeadOutputs<Scalar> operator()(const Tensor<Scalar>& search_tokens) const {
    const Index ns = search_tokens.dim(0);
    const Index g = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(ns))));
    if (g * g != ns) throw DimensionError("head_forward: " + std::to_string(ns) + " search tokens is not a square grid");
    HeadOutputs<Scalar> out;
    out.score = reshape(score_branch(search_tokens, g), {g, g});
    out.size = reshape(transpose(size_branch(search_tokens, g)), {2, g, g});
    out.offset = reshape(transpose(offset_branch(search_tokens, g)), {2, g, g});
    return out;
  }

  void visit(const std::string& prefix, const ParamVisitor<Scalar>& f) {
    score_branch.visit(prefix + ".score", f);
    size_branch.visit(prefix + ".size", f);
    offset_branch.visit(prefix + ".offset", f);
  }

  Index parameter_count() const {
    return score_branch.parameter_count() + size_branch.parameter_count() + offset_branch.parameter_count();
  }
};

template <typename Scalar>
HeadOutputs<Scalar> head_forward(const PredictionHead<Scalar>& head, const Tensor<Scalar>& search_tokens) {
  return head(search_tokens);
}

/// Outer product of the length-G Hanning vector 0.5 (1 - cos(2 pi n / (G - 1))).
template <typename Scalar>
Tensor<Scalar> hanning_2d(Index g) {
  if (g < 2) throw std::invalid_argument("hanning_2d: G must be >= 2");
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(g);
  for (Index n = 0; n < g; ++n) {
    w[n] = static_cast<Scalar>(0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / static_cast<double>(g - 1))));
  }
  return Tensor<Scalar>::from_matrix(w * w.transpose());
}

struct GridCell {
  Index row;
  Index col;
};

/// Grid cell that contains the normalized point (cx, cy).
inline GridCell cell_of(double cx, double cy, Index g) {
  const auto clampi = [g](double v) { return std::clamp(static_cast<Index>(std::floor(v * g)), Index{0}, g - 1); };
  return {clampi(cy), clampi(cx)};
}

/// Applies the optional window to the score map, takes the arg-max cell and
/// reads offset and size there.
template <typename Scalar>
BBox decode(const HeadOutputs<Scalar>& out, const Tensor<Scalar>* window = nullptr) {
  const Index g = out.grid();
  const auto& p = out.score.data();
  Index best = 0;
  Scalar best_value = -1;
  for (Index idx = 0; idx < g * g; ++idx) {
    const Scalar v = window ? p[idx] * window->data()[idx] : p[idx];
    if (v > best_value) {
      best_value = v;
      best = idx;
    }
  }
  const Index i = best / g, j = best % g;
  BBox box;
  box.cx = (static_cast<double>(j) + out.offset.data()[best]) / static_cast<double>(g);
  box.cy = (static_cast<double>(i) + out.offset.data()[g * g + best]) / static_cast<double>(g);
  box.w = out.size.data()[best];
  box.h = out.size.data()[g * g + best];
  return box;
}

/// Gaussian heatmap around `centre`, sigma = max(1, G / 16).
template <typename Scalar>
Tensor<Scalar> gaussian_heatmap(Index g, GridCell centre) {
  const double sigma = std::max(1.0, static_cast<double>(g) / 16.0);
  Tensor<Scalar> t({g, g});
  for (Index i = 0; i < g; ++i) {
    for (Index j = 0; j < g; ++j) {
      const double di = static_cast<double>(i - centre.row), dj = static_cast<double>(j - centre.col);
      t.data()[i * g + j] = static_cast<Scalar>(std::exp(-(di * di + dj * dj) / (2 * sigma * sigma)));
    }
  }
  return t;
}

/// Penalty-reduced focal loss against a target heatmap, averaged over all
/// cells; alpha = 2, beta = 4, p clamped to [1e-6, 1 - 1e-6].
template <typename Scalar>
Tensor<Scalar> focal_loss(const Tensor<Scalar>& p, const Tensor<Scalar>& target) {
  detail::require_same_shape(p.shape(), target.shape(), "focal_loss");
  constexpr double lo = 1e-6, hi = 1 - 1e-6;
  const Index n = p.numel();
  const Vec<Scalar>& t = target.data();
  double total = 0;
  for (Index c = 0; c < n; ++c) {
    const double q = std::clamp(static_cast<double>(p.data()[c]), lo, hi);
    if (t[c] == Scalar(1)) {
      total -= (1 - q) * (1 - q) * std::log(q);
    } else {
      total -= std::pow(1 - static_cast<double>(t[c]), 4) * q * q * std::log(1 - q);
    }
  }
  return Tensor<Scalar>::make_result(
      {1}, Vec<Scalar>::Constant(1, static_cast<Scalar>(total / n)), {p},
      [t = Vec<Scalar>(t), n](Node<Scalar>& node) {
        auto* gp = detail::grad_of(node, 0);
        if (!gp) return;
        const Vec<Scalar>& pv = detail::value_of(node, 0);
        const double g = static_cast<double>(node.grad[0]) / n;
        for (Index c = 0; c < n; ++c) {
          const double raw = static_cast<double>(pv[c]);
          if (raw < lo || raw > hi) continue;
          double d;
          if (t[c] == Scalar(1)) {
            d = 2 * (1 - raw) * std::log(raw) - (1 - raw) * (1 - raw) / raw;
          } else {
            const double w = std::pow(1 - static_cast<double>(t[c]), 4);
            d = -w * (2 * raw * std::log(1 - raw) - raw * raw / (1 - raw));
          }
          (*gp)[c] += static_cast<Scalar>(g * d);
        }
      });
}

template <typename Scalar>
Tensor<Scalar> focal_loss(const Tensor<Scalar>& p, GridCell centre) {
  return focal_loss(p, gaussian_heatmap<Scalar>(p.dim(0), centre));
}

/// Differentiable 1 - GIoU for a predicted (cx, cy, w, h) vector against a
/// fixed box.
template <typename Scalar>
Tensor<Scalar> giou_loss(const Tensor<Scalar>& pred, const BBox& gt) {
  if (pred.numel() != 4) throw DimensionError("giou_loss: prediction must have 4 entries");
  constexpr Scalar floor = static_cast<Scalar>(1e-12);
  const auto pick = [&](Index i) { return gather(pred, {i}); };
  const auto constant = [](double v) { return Tensor<Scalar>::scalar(static_cast<Scalar>(v)); };
  const Tensor<Scalar> cx = pick(0), cy = pick(1), w = pick(2), h = pick(3);
  const Tensor<Scalar> half_w = scale(w, Scalar(0.5)), half_h = scale(h, Scalar(0.5));
  const Tensor<Scalar> px1 = sub(cx, half_w), px2 = add(cx, half_w);
  const Tensor<Scalar> py1 = sub(cy, half_h), py2 = add(cy, half_h);
  const Tensor<Scalar> gx1 = constant(gt.x1()), gx2 = constant(gt.x2());
  const Tensor<Scalar> gy1 = constant(gt.y1()), gy2 = constant(gt.y2());

  const Tensor<Scalar> iw = clamp_min(sub(minimum(px2, gx2), maximum(px1, gx1)), Scalar(0));
  const Tensor<Scalar> ih = clamp_min(sub(minimum(py2, gy2), maximum(py1, gy1)), Scalar(0));
  const Tensor<Scalar> inter = mul(iw, ih);
  const Tensor<Scalar> area_p = clamp_min(mul(w, h), floor);
  const Tensor<Scalar> area_g = constant(std::max(gt.area(), 1e-12));
  const Tensor<Scalar> uni = sub(add(area_p, area_g), inter);
  const Tensor<Scalar> iou_t = div(inter, uni);
  const Tensor<Scalar> cw = sub(maximum(px2, gx2), minimum(px1, gx1));
  const Tensor<Scalar> ch = sub(maximum(py2, gy2), minimum(py1, gy1));
  const Tensor<Scalar> enclose = clamp_min(mul(cw, ch), floor);
  const Tensor<Scalar> giou = sub(iou_t, div(sub(enclose, uni), enclose));
  return add_scalar(scale(giou, Scalar(-1)), Scalar(1));
}

template <typename Scalar>
struct HeadLosses {
  Tensor<Scalar> cls;
  Tensor<Scalar> iou;
  Tensor<Scalar> l1;
  Tensor<Scalar> box;  // (cx, cy, w, h) predicted at the ground-truth cell
};

/// Tracking losses with regression supervised at the ground-truth cell.
template <typename Scalar>
HeadLosses<Scalar> head_losses(const HeadOutputs<Scalar>& out, const BBox& gt) {
  const Index g = out.grid();
  const GridCell cell = cell_of(gt.cx, gt.cy, g);
  const Index at = cell.row * g + cell.col;
  HeadLosses<Scalar> losses;
  losses.cls = focal_loss(out.score, cell);
  const Tensor<Scalar> offsets = gather(out.offset, {at, g * g + at});
  const Tensor<Scalar> sizes = gather(out.size, {at, g * g + at});
  const Tensor<Scalar> cell_origin = Tensor<Scalar>::from_values(
      {2}, {static_cast<Scalar>(cell.col) / static_cast<Scalar>(g), static_cast<Scalar>(cell.row) / static_cast<Scalar>(g)});
  const Tensor<Scalar> centre = add(cell_origin, scale(offsets, Scalar(1) / static_cast<Scalar>(g)));
  const std::vector<Tensor<Scalar>> parts{reshape(centre, {1, 2}), reshape(sizes, {1, 2})};
  losses.box = reshape(concat_cols<Scalar>(parts), {4});
  const Tensor<Scalar> gt_vec = Tensor<Scalar>::from_values(
      {4}, {static_cast<Scalar>(gt.cx), static_cast<Scalar>(gt.cy), static_cast<Scalar>(gt.w), static_cast<Scalar>(gt.h)});
  losses.l1 = mean(abs(sub(losses.box, gt_vec)));
  losses.iou = giou_loss(losses.box, gt);
  return losses;
}

}  // namespace sgla

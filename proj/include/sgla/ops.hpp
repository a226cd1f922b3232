#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include "sgla/tensor.hpp"

namespace sgla {

namespace detail {

template <typename Scalar>
Vec<Scalar>* grad_of(Node<Scalar>& node, std::size_t parent) {
  auto& p = node.parents[parent];
  return p->requires_grad ? &p->grad_buffer() : nullptr;
}

template <typename Scalar>
const Vec<Scalar>& value_of(const Node<Scalar>& node, std::size_t parent) {
  return node.parents[parent]->data;
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

template <typename Scalar>
void require_rank2(const Tensor<Scalar>& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + to_string(t.shape()));
}

template <typename Scalar>
ConstMatrixMap<Scalar> cmap(const Vec<Scalar>& v, Index rows, Index cols) {
  return ConstMatrixMap<Scalar>(v.data(), rows, cols);
}

template <typename Scalar>
MatrixMap<Scalar> map(Vec<Scalar>& v, Index rows, Index cols) {
  return MatrixMap<Scalar>(v.data(), rows, cols);
}

template <typename Scalar>
Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> row_vector(const Vec<Scalar>& v) {
  return Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(v.data(), v.size());
}

template <typename Scalar>
Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>> row_vector(Vec<Scalar>& v) {
  return Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(v.data(), v.size());
}

inline constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluCubic = 0.044715;

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_rank2(a, "matmul");
  detail::require_rank2(b, "matmul");
  const Index m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions disagree, " + to_string(a.shape()) + " x " +
                         to_string(b.shape()));
  }
  Vec<Scalar> out(m * n);
  detail::map(out, m, n).noalias() = a.matrix() * b.matrix();
  return Tensor<Scalar>::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node<Scalar>& node) {
    auto g = detail::cmap(node.grad, m, n);
    if (auto* ga = detail::grad_of(node, 0)) {
      detail::map(*ga, m, k).noalias() += g * detail::cmap(detail::value_of(node, 1), k, n).transpose();
    }
    if (auto* gb = detail::grad_of(node, 1)) {
      detail::map(*gb, k, n).noalias() += detail::cmap(detail::value_of(node, 0), m, k).transpose() * g;
    }
  });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  detail::require_rank2(a, "transpose");
  const Index r = a.dim(0), c = a.dim(1);
  Vec<Scalar> out(r * c);
  detail::map(out, c, r) = a.matrix().transpose();
  return Tensor<Scalar>::make_result({c, r}, std::move(out), {a}, [r, c](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) {
      detail::map(*ga, r, c) += detail::cmap(node.grad, c, r).transpose();
    }
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "add");
  return Tensor<Scalar>::make_result(a.shape(), a.data() + b.data(), {a, b}, [](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad;
    if (auto* gb = detail::grad_of(node, 1)) *gb += node.grad;
  });
}

template <typename Scalar>
Tensor<Scalar> sub(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "sub");
  return Tensor<Scalar>::make_result(a.shape(), a.data() - b.data(), {a, b}, [](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad;
    if (auto* gb = detail::grad_of(node, 1)) *gb -= node.grad;
  });
}

template <typename Scalar>
Tensor<Scalar> mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "mul");
  return Tensor<Scalar>::make_result(a.shape(), a.data() * b.data(), {a, b}, [](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad * detail::value_of(node, 1);
    if (auto* gb = detail::grad_of(node, 1)) *gb += node.grad * detail::value_of(node, 0);
  });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar factor) {
  return Tensor<Scalar>::make_result(a.shape(), a.data() * factor, {a}, [factor](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad * factor;
  });
}

/// a[N x D] + bias[D], broadcast over rows.
template <typename Scalar>
Tensor<Scalar> add_bias(const Tensor<Scalar>& a, const Tensor<Scalar>& bias) {
  detail::require_rank2(a, "add_bias");
  const Index n = a.dim(0), d = a.dim(1);
  if (bias.numel() != d) {
    throw DimensionError("add_bias: bias " + to_string(bias.shape()) + " does not match " + to_string(a.shape()));
  }
  Vec<Scalar> out(n * d);
  detail::map(out, n, d) = a.matrix().rowwise() + detail::row_vector(bias.data());
  return Tensor<Scalar>::make_result(a.shape(), std::move(out), {a, bias}, [n, d](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad;
    if (auto* gb = detail::grad_of(node, 1)) {
      detail::row_vector(*gb) += detail::cmap(node.grad, n, d).colwise().sum();
    }
  });
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  Vec<Scalar> out = (Scalar(1) + (-a.data()).exp()).inverse();
  return Tensor<Scalar>::make_result(a.shape(), out, {a}, [out](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad * out * (Scalar(1) - out);
  });
}

/// GELU, tanh approximation.
template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& a) {
  const Scalar c = static_cast<Scalar>(detail::kGeluScale);
  const Scalar k = static_cast<Scalar>(detail::kGeluCubic);
  const Vec<Scalar>& x = a.data();
  Vec<Scalar> t = (c * (x + k * x.cube())).tanh();
  Vec<Scalar> out = Scalar(0.5) * x * (Scalar(1) + t);
  return Tensor<Scalar>::make_result(a.shape(), std::move(out), {a}, [t, c, k](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) {
      const Vec<Scalar>& x = detail::value_of(node, 0);
      Vec<Scalar> dt = c * (Scalar(1) + Scalar(3) * k * x.square()) * (Scalar(1) - t.square());
      *ga += node.grad * (Scalar(0.5) * (Scalar(1) + t) + Scalar(0.5) * x * dt);
    }
  });
}

template <typename Scalar>
Tensor<Scalar> abs(const Tensor<Scalar>& a) {
  return Tensor<Scalar>::make_result(a.shape(), a.data().abs(), {a}, [](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad * detail::value_of(node, 0).sign();
  });
}

template <typename Scalar>
Tensor<Scalar> div(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "div");
  return Tensor<Scalar>::make_result(a.shape(), a.data() / b.data(), {a, b}, [](Node<Scalar>& node) {
    const Vec<Scalar>& x = detail::value_of(node, 0);
    const Vec<Scalar>& y = detail::value_of(node, 1);
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad / y;
    if (auto* gb = detail::grad_of(node, 1)) *gb -= node.grad * x / y.square();
  });
}

/// Pointwise min/max; ties route the gradient to `a`.
template <typename Scalar>
Tensor<Scalar> minimum(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "minimum");
  return Tensor<Scalar>::make_result(a.shape(), a.data().min(b.data()), {a, b}, [](Node<Scalar>& node) {
    const auto pick_a = (detail::value_of(node, 0) <= detail::value_of(node, 1)).template cast<Scalar>();
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad * pick_a;
    if (auto* gb = detail::grad_of(node, 1)) *gb += node.grad * (Scalar(1) - pick_a);
  });
}

template <typename Scalar>
Tensor<Scalar> maximum(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "maximum");
  return Tensor<Scalar>::make_result(a.shape(), a.data().max(b.data()), {a, b}, [](Node<Scalar>& node) {
    const auto pick_a = (detail::value_of(node, 0) >= detail::value_of(node, 1)).template cast<Scalar>();
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad * pick_a;
    if (auto* gb = detail::grad_of(node, 1)) *gb += node.grad * (Scalar(1) - pick_a);
  });
}

/// max(a, floor); zero gradient where the floor is active.
template <typename Scalar>
Tensor<Scalar> clamp_min(const Tensor<Scalar>& a, Scalar floor) {
  return Tensor<Scalar>::make_result(a.shape(), a.data().max(floor), {a}, [floor](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) {
      *ga += node.grad * (detail::value_of(node, 0) > floor).template cast<Scalar>();
    }
  });
}

template <typename Scalar>
Tensor<Scalar> add_scalar(const Tensor<Scalar>& a, Scalar offset) {
  return Tensor<Scalar>::make_result(a.shape(), a.data() + offset, {a}, [](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad;
  });
}

enum class Elementwise { add, sub, mul, sigmoid, gelu, abs };

/// Dispatching form; `b` is ignored for unary ops.
template <typename Scalar>
Tensor<Scalar> elementwise(Elementwise op, const Tensor<Scalar>& a, const Tensor<Scalar>& b = {}) {
  switch (op) {
    case Elementwise::add: return add(a, b);
    case Elementwise::sub: return sub(a, b);
    case Elementwise::mul: return mul(a, b);
    case Elementwise::sigmoid: return sigmoid(a);
    case Elementwise::gelu: return gelu(a);
    case Elementwise::abs: return abs(a);
  }
  throw std::invalid_argument("unknown elementwise op");
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return add(a, b); }
template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return sub(a, b); }
template <typename Scalar>
Tensor<Scalar> operator*(const Tensor<Scalar>& a, const Tensor<Scalar>& b) { return mul(a, b); }

// ---------------------------------------------------------------------------
// Normalization

/// Softmax along `axis` with max-subtraction.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& a, int axis = -1) {
  const int rank = static_cast<int>(a.rank());
  if (axis < 0) axis += rank;
  if (axis < 0 || axis >= rank) throw DimensionError("softmax: axis out of range for " + to_string(a.shape()));
  Index outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= a.dim(i);
  for (int i = axis + 1; i < rank; ++i) inner *= a.dim(i);
  const Index n = a.dim(axis);

  Vec<Scalar> out(a.numel());
  const Vec<Scalar>& x = a.data();
  if (inner == 1) {
    auto in = detail::cmap(x, outer, n);
    auto y = detail::map(out, outer, n);
    y = (in.colwise() - in.rowwise().maxCoeff()).array().exp().matrix();
    y = y.array().colwise() / y.rowwise().sum().array();
  } else {
    for (Index o = 0; o < outer; ++o) {
      for (Index i = 0; i < inner; ++i) {
        const Index base = o * n * inner + i;
        Scalar peak = x[base];
        for (Index j = 1; j < n; ++j) peak = std::max(peak, x[base + j * inner]);
        Scalar total = 0;
        for (Index j = 0; j < n; ++j) total += (out[base + j * inner] = std::exp(x[base + j * inner] - peak));
        for (Index j = 0; j < n; ++j) out[base + j * inner] /= total;
      }
    }
  }
  return Tensor<Scalar>::make_result(a.shape(), out, {a}, [out, outer, n, inner](Node<Scalar>& node) {
    auto* ga = detail::grad_of(node, 0);
    if (!ga) return;
    const Vec<Scalar>& g = node.grad;
    for (Index o = 0; o < outer; ++o) {
      for (Index i = 0; i < inner; ++i) {
        const Index base = o * n * inner + i;
        Scalar dot = 0;
        for (Index j = 0; j < n; ++j) dot += g[base + j * inner] * out[base + j * inner];
        for (Index j = 0; j < n; ++j) {
          const Index at = base + j * inner;
          (*ga)[at] += out[at] * (g[at] - dot);
        }
      }
    }
  });
}

/// Per-row layer normalization of a[N x D] with affine gain and bias.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& a, const Tensor<Scalar>& gain, const Tensor<Scalar>& bias,
                          Scalar eps = Scalar(1e-5)) {
  detail::require_rank2(a, "layer_norm");
  const Index n = a.dim(0), d = a.dim(1);
  if (gain.numel() != d || bias.numel() != d) throw DimensionError("layer_norm: affine size mismatch");
  if (!(eps > 0)) throw std::invalid_argument("layer_norm: eps must be positive");

  auto x = a.matrix();
  Vec<Scalar> mean = x.rowwise().mean().array();
  Vec<Scalar> xhat_data(n * d);
  auto xhat = detail::map(xhat_data, n, d);
  xhat = x.colwise() - mean.matrix();
  Vec<Scalar> inv_std = ((xhat.array().square().rowwise().sum() / Scalar(d)) + eps).rsqrt();
  xhat = inv_std.matrix().asDiagonal() * xhat;

  Vec<Scalar> out(n * d);
  detail::map(out, n, d) = (xhat.array().rowwise() * detail::row_vector(gain.data()).array()).rowwise() +
                           detail::row_vector(bias.data()).array();
  return Tensor<Scalar>::make_result(
      a.shape(), std::move(out), {a, gain, bias}, [xhat_data, inv_std, n, d](Node<Scalar>& node) {
        auto g = detail::cmap(node.grad, n, d);
        auto xhat = detail::cmap(xhat_data, n, d);
        if (auto* ggain = detail::grad_of(node, 1)) {
          detail::row_vector(*ggain) += g.cwiseProduct(xhat).colwise().sum();
        }
        if (auto* gbias = detail::grad_of(node, 2)) detail::row_vector(*gbias) += g.colwise().sum();
        if (auto* ga = detail::grad_of(node, 0)) {
          RowMatrix<Scalar> gx = g.array().rowwise() * detail::row_vector(detail::value_of(node, 1)).array();
          Vec<Scalar> mean_g = gx.rowwise().mean().array();
          Vec<Scalar> mean_gx = gx.cwiseProduct(xhat).rowwise().mean().array();
          RowMatrix<Scalar> centered = gx.colwise() - mean_g.matrix();
          centered -= (xhat.array().colwise() * mean_gx).matrix();
          detail::map(*ga, n, d) += inv_std.matrix().asDiagonal() * centered;
        }
      });
}

// ---------------------------------------------------------------------------
// Structural

template <typename Scalar>
Tensor<Scalar> reshape(const Tensor<Scalar>& a, Shape shape) {
  if (numel(shape) != a.numel()) {
    throw DimensionError("reshape: " + to_string(a.shape()) + " -> " + to_string(shape));
  }
  return Tensor<Scalar>::make_result(std::move(shape), a.data(), {a}, [](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad;
  });
}

/// Rows [begin, end) of a matrix.
template <typename Scalar>
Tensor<Scalar> slice_rows(const Tensor<Scalar>& a, Index begin, Index end) {
  detail::require_rank2(a, "slice_rows");
  const Index cols = a.dim(1);
  if (begin < 0 || end > a.dim(0) || begin >= end) throw DimensionError("slice_rows: bad range");
  Vec<Scalar> out = a.data().segment(begin * cols, (end - begin) * cols);
  return Tensor<Scalar>::make_result({end - begin, cols}, std::move(out), {a}, [begin, cols](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) ga->segment(begin * cols, node.grad.size()) += node.grad;
  });
}

/// Columns [begin, end) of a matrix.
template <typename Scalar>
Tensor<Scalar> slice_cols(const Tensor<Scalar>& a, Index begin, Index end) {
  detail::require_rank2(a, "slice_cols");
  const Index rows = a.dim(0), cols = a.dim(1), width = end - begin;
  if (begin < 0 || end > cols || width <= 0) throw DimensionError("slice_cols: bad range");
  Vec<Scalar> out(rows * width);
  detail::map(out, rows, width) = a.matrix().middleCols(begin, width);
  return Tensor<Scalar>::make_result({rows, width}, std::move(out), {a}, [rows, cols, begin, width](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) {
      detail::map(*ga, rows, cols).middleCols(begin, width) += detail::cmap(node.grad, rows, width);
    }
  });
}

template <typename Scalar>
Tensor<Scalar> concat_rows(std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const Index cols = parts.front().dim(1);
  Index rows = 0;
  for (const auto& p : parts) {
    detail::require_rank2(p, "concat_rows");
    if (p.dim(1) != cols) throw DimensionError("concat_rows: column mismatch");
    rows += p.dim(0);
  }
  Vec<Scalar> out(rows * cols);
  Index offset = 0;
  for (const auto& p : parts) {
    out.segment(offset, p.numel()) = p.data();
    offset += p.numel();
  }
  return Tensor<Scalar>::make_result(
      {rows, cols}, std::move(out), std::vector<Tensor<Scalar>>(parts.begin(), parts.end()),
      [](Node<Scalar>& node) {
        Index offset = 0;
        for (std::size_t i = 0; i < node.parents.size(); ++i) {
          const Index len = node.parents[i]->data.size();
          if (auto* g = detail::grad_of(node, i)) *g += node.grad.segment(offset, len);
          offset += len;
        }
      });
}

template <typename Scalar>
Tensor<Scalar> concat_cols(std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const Index rows = parts.front().dim(0);
  Index cols = 0;
  for (const auto& p : parts) {
    detail::require_rank2(p, "concat_cols");
    if (p.dim(0) != rows) throw DimensionError("concat_cols: row mismatch");
    cols += p.dim(1);
  }
  Vec<Scalar> out(rows * cols);
  auto m = detail::map(out, rows, cols);
  Index offset = 0;
  for (const auto& p : parts) {
    m.middleCols(offset, p.dim(1)) = p.matrix();
    offset += p.dim(1);
  }
  return Tensor<Scalar>::make_result(
      {rows, cols}, std::move(out), std::vector<Tensor<Scalar>>(parts.begin(), parts.end()),
      [rows, cols](Node<Scalar>& node) {
        auto g = detail::cmap(node.grad, rows, cols);
        Index offset = 0;
        for (std::size_t i = 0; i < node.parents.size(); ++i) {
          const Index width = node.parents[i]->data.size() / rows;
          if (auto* gp = detail::grad_of(node, i)) detail::map(*gp, rows, width) += g.middleCols(offset, width);
          offset += width;
        }
      });
}

/// Column j of a matrix as a rank-1 tensor.
template <typename Scalar>
Tensor<Scalar> column(const Tensor<Scalar>& a, Index j) {
  detail::require_rank2(a, "column");
  const Index rows = a.dim(0), cols = a.dim(1);
  if (j < 0 || j >= cols) throw DimensionError("column: index out of range");
  Vec<Scalar> out = a.matrix().col(j).array();
  return Tensor<Scalar>::make_result({rows}, std::move(out), {a}, [rows, cols, j](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) detail::map(*ga, rows, cols).col(j) += node.grad.matrix();
  });
}

/// Gathers flat positions into a rank-1 tensor.
template <typename Scalar>
Tensor<Scalar> gather(const Tensor<Scalar>& a, std::vector<Index> indices) {
  const Index len = static_cast<Index>(indices.size());
  if (len == 0) throw DimensionError("gather: empty index list");
  Vec<Scalar> out(len);
  for (Index i = 0; i < len; ++i) {
    if (indices[i] < 0 || indices[i] >= a.numel()) throw DimensionError("gather: index out of range");
    out[i] = a.data()[indices[i]];
  }
  return Tensor<Scalar>::make_result({len}, std::move(out), {a}, [indices = std::move(indices)](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) {
      for (std::size_t i = 0; i < indices.size(); ++i) (*ga)[indices[i]] += node.grad[static_cast<Index>(i)];
    }
  });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  return Tensor<Scalar>::make_result({1}, Vec<Scalar>::Constant(1, a.data().sum()), {a}, [](Node<Scalar>& node) {
    if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad[0];
  });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  const Scalar inv = Scalar(1) / static_cast<Scalar>(a.numel());
  return Tensor<Scalar>::make_result({1}, Vec<Scalar>::Constant(1, a.data().sum() * inv), {a},
                                     [inv](Node<Scalar>& node) {
                                       if (auto* ga = detail::grad_of(node, 0)) *ga += node.grad[0] * inv;
                                     });
}

// ---------------------------------------------------------------------------
// Layers

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const Tensor<Scalar>& weight, const Tensor<Scalar>& bias) {
  return add_bias(matmul(x, weight), bias);
}

/// 3x3 zero-padded patch gather of a (H*W) x C feature map stored token-major.
/// Output row (i*W + j) holds the nine neighbours in (dy, dx) raster order,
/// each as a C-wide block, so a 3x3 convolution is one matmul with a
/// (9C) x C_out weight.
template <typename Scalar>
Tensor<Scalar> im2col3x3(const Tensor<Scalar>& x, Index height, Index width) {
  detail::require_rank2(x, "im2col3x3");
  const Index c = x.dim(1);
  if (x.dim(0) != height * width) throw DimensionError("im2col3x3: token count does not match grid");
  Vec<Scalar> out = Vec<Scalar>::Zero(height * width * 9 * c);
  auto src = x.matrix();
  auto dst = detail::map(out, height * width, 9 * c);
  for (Index i = 0; i < height; ++i) {
    for (Index j = 0; j < width; ++j) {
      for (Index dy = -1; dy <= 1; ++dy) {
        for (Index dx = -1; dx <= 1; ++dx) {
          const Index y = i + dy, xx = j + dx;
          if (y < 0 || y >= height || xx < 0 || xx >= width) continue;
          dst.row(i * width + j).segment(((dy + 1) * 3 + (dx + 1)) * c, c) = src.row(y * width + xx);
        }
      }
    }
  }
  return Tensor<Scalar>::make_result({height * width, 9 * c}, std::move(out), {x}, [height, width, c](Node<Scalar>& node) {
    auto* gx = detail::grad_of(node, 0);
    if (!gx) return;
    auto g = detail::cmap(node.grad, height * width, 9 * c);
    auto dst = detail::map(*gx, height * width, c);
    for (Index i = 0; i < height; ++i) {
      for (Index j = 0; j < width; ++j) {
        for (Index dy = -1; dy <= 1; ++dy) {
          for (Index dx = -1; dx <= 1; ++dx) {
            const Index y = i + dy, xx = j + dx;
            if (y < 0 || y >= height || xx < 0 || xx >= width) continue;
            dst.row(y * width + xx) += g.row(i * width + j).segment(((dy + 1) * 3 + (dx + 1)) * c, c);
          }
        }
      }
    }
  });
}

}  // namespace sgla

#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace sgla {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {
inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename Scalar>
using Vec = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;

template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

/// One vertex of the dynamic compute graph. Owns value and gradient storage;
/// parents are kept alive by shared ownership so a loss pins its whole graph.
template <typename Scalar>
struct Node {
  Shape shape;
  Vec<Scalar> data;
  Vec<Scalar> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  bool has_grad() const { return grad.size() == data.size(); }

  Vec<Scalar>& grad_buffer() {
    if (!has_grad()) grad = Vec<Scalar>::Zero(data.size());
    return grad;
  }
};

/// Dense n-dimensional array with optional reverse-mode gradient tracking.
/// Copies share the underlying node; use clone() for a detached deep copy.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using NodeType = Node<Scalar>;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : node_(std::make_shared<NodeType>()) {
    validate_shape(shape);
    node_->data = Vec<Scalar>::Zero(sgla::numel(shape));
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, Vec<Scalar> data, bool requires_grad = false)
      : node_(std::make_shared<NodeType>()) {
    validate_shape(shape);
    if (data.size() != sgla::numel(shape)) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + sgla::to_string(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }

  static Tensor ones(Shape shape, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    t.node_->data.setOnes();
    return t;
  }

  static Tensor full(Shape shape, Scalar value, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    t.node_->data.setConstant(value);
    return t;
  }

  static Tensor scalar(Scalar value, bool requires_grad = false) {
    return full({1}, value, requires_grad);
  }

  static Tensor from_matrix(const RowMatrix<Scalar>& m, bool requires_grad = false) {
    Vec<Scalar> data = Eigen::Map<const Vec<Scalar>>(m.data(), m.size());
    return Tensor({m.rows(), m.cols()}, std::move(data), requires_grad);
  }

  static Tensor from_values(Shape shape, std::initializer_list<Scalar> values,
                            bool requires_grad = false) {
    Vec<Scalar> data(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) data[i++] = v;
    return Tensor(std::move(shape), std::move(data), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  Index dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  Index numel() const { return node_->data.size(); }

  Vec<Scalar>& data() { return node_->data; }
  const Vec<Scalar>& data() const { return node_->data; }

  Scalar item() const {
    if (numel() != 1) throw DimensionError("item() on tensor of shape " + sgla::to_string(shape()));
    return node_->data[0];
  }

  Scalar operator[](Index i) const { return node_->data[i]; }

  /// Row-major 2-D view; tensors of rank > 2 fold trailing axes into columns.
  MatrixMap<Scalar> matrix() {
    return MatrixMap<Scalar>(node_->data.data(), rows(), cols());
  }
  ConstMatrixMap<Scalar> matrix() const {
    return ConstMatrixMap<Scalar>(node_->data.data(), rows(), cols());
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return node_->has_grad(); }
  const Vec<Scalar>& grad() const { return node_->grad; }
  Vec<Scalar>& grad() { return node_->grad_buffer(); }
  void zero_grad() { node_->grad.resize(0); }

  /// Deep copy without graph history.
  Tensor clone() const {
    return Tensor(shape(), node_->data, requires_grad());
  }

  /// Shares no storage with this tensor and never records gradients.
  Tensor detach() const { return Tensor(shape(), node_->data, false); }

  const std::shared_ptr<NodeType>& node() const { return node_; }

  /// Builds an op result; the graph edge is recorded only when grad mode is
  /// on and at least one parent requires gradients.
  static Tensor make_result(Shape shape, Vec<Scalar> data,
                            std::vector<Tensor> parents,
                            std::function<void(NodeType&)> backward_fn) {
    Tensor out(std::move(shape), std::move(data));
    if (!grad_enabled()) return out;
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->parents.reserve(parents.size());
    for (auto& p : parents) out.node_->parents.push_back(p.node_);
    out.node_->backward_fn = std::move(backward_fn);
    return out;
  }

 private:
  Index rows() const { return rank() == 0 ? 1 : (rank() == 1 ? 1 : shape()[0]); }
  Index cols() const { return rank() <= 1 ? numel() : numel() / shape()[0]; }

  static void validate_shape(const Shape& shape) {
    for (Index d : shape) {
      if (d <= 0) throw DimensionError("non-positive dimension in shape " + sgla::to_string(shape));
    }
  }

  std::shared_ptr<NodeType> node_;
};

/// Reverse-mode sweep from a scalar loss. Every reachable node is visited
/// exactly once, in reverse topological order.
template <typename Scalar>
void backward(const Tensor<Scalar>& loss) {
  if (loss.numel() != 1) {
    throw DimensionError("backward() requires a scalar loss, got shape " + to_string(loss.shape()));
  }
  using NodePtr = Node<Scalar>*;
  std::vector<NodePtr> order;
  std::unordered_set<NodePtr> visited;
  std::vector<std::pair<NodePtr, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodePtr parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  loss.node()->grad_buffer().setOnes();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodePtr node = *it;
    if (node->backward_fn && node->has_grad()) node->backward_fn(*node);
  }
}

}  // namespace sgla

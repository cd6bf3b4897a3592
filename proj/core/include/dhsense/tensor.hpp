#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dhsense {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixView = Eigen::Map<RowMatrix>;
using ConstMatrixView = Eigen::Map<const RowMatrix>;

using Shape = std::vector<std::size_t>;

/// Vector-aligned storage. Eigen peels reductions up to the first aligned
/// element, so an unaligned buffer changes the summation order from one
/// allocation to the next and breaks bitwise reproducibility.
using Buffer = std::vector<double, Eigen::aligned_allocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Row-major dense buffer. Rank-2 views treat the first dimension as rows and
/// everything else as columns; a rank-1 tensor is a single row.
struct Tensor {
  Shape shape;
  Buffer data;
  std::optional<Buffer> grad;
  std::size_t node_id = 0;  // position on the tape that produced it, 0 if none

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0);
  Tensor(Shape s, Buffer values);
  static Tensor from_matrix(const Eigen::Ref<const RowMatrix>& m);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  MatrixView matrix();
  ConstMatrixView matrix() const;

  /// Allocates a zero gradient if absent and returns it.
  Buffer& ensure_grad();
  MatrixView grad_matrix();
};

/// One recorded operation: its value, the values it was computed from, and
/// how to push its gradient back into them.
struct Node {
  Tensor value;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  std::string name;  // set for parameters
};

/// Handle to a node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& name() const { return node_->name; }

  /// Gradient buffer (zeros if nothing flowed into this node yet).
  const Buffer& grad() const;
  void zero_grad();

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& ptr() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var parameter(Tensor value, std::string name = {});

/// Records a result node. `backward` is only kept when some parent needs a
/// gradient and recording is not disabled on this thread.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward);

/// Reverse topological sweep from a root.
class Tape {
 public:
  /// Depth-first ordering of every node reachable from `root` that requires
  /// a gradient; parents come before children.
  static Tape record(const Var& root);

  const std::vector<Node*>& order() const { return order_; }
  /// Seeds the root gradient with ones (or `seed`) and runs every backward
  /// closure once, children first.
  void backward(const Buffer* seed = nullptr);

 private:
  std::vector<Node*> order_;
};

void backward(const Var& root);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

}  // namespace dhsense

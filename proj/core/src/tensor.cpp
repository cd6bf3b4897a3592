#include "dhsense/tensor.hpp"

#include <unordered_set>

#include "dhsense/error.hpp"

namespace dhsense {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(shape_size(shape), fill) {}

Tensor::Tensor(Shape s, Buffer values) : shape(std::move(s)), data(std::move(values)) {
  if (data.size() != shape_size(shape)) {
    throw ShapeError("buffer of " + std::to_string(data.size()) + " values does not fit shape " + shape_string(shape));
  }
}

Tensor Tensor::from_matrix(const Eigen::Ref<const RowMatrix>& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.matrix() = m;
  return t;
}

std::size_t Tensor::rows() const {
  if (shape.empty()) return 1;
  if (shape.size() == 1) return 1;
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.empty()) return 1;
  if (shape.size() == 1) return shape[0];
  return shape[0] == 0 ? 0 : data.size() / shape[0];
}

MatrixView Tensor::matrix() {
  return MatrixView(data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

ConstMatrixView Tensor::matrix() const {
  return ConstMatrixView(data.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

Buffer& Tensor::ensure_grad() {
  if (!grad) grad.emplace(data.size(), 0.0);
  return *grad;
}

MatrixView Tensor::grad_matrix() {
  return MatrixView(ensure_grad().data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols()));
}

const Buffer& Var::grad() const { return node_->value.ensure_grad(); }

void Var::zero_grad() {
  if (node_->value.grad) std::fill(node_->value.grad->begin(), node_->value.grad->end(), 0.0);
}

Var constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return Var(std::move(n));
}

Var parameter(Tensor value, std::string name) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->name = std::move(name);
  return Var(std::move(n));
}

Var make_result(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  if (!g_grad_enabled) return Var(std::move(n));
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.ptr());
    n->backward = std::move(backward);
  }
  return Var(std::move(n));
}

Tape Tape::record(const Var& root) {
  Tape tape;
  if (!root || !root.requires_grad()) return tape;
  std::unordered_set<Node*> seen;
  // iterative post-order DFS so deep graphs cannot blow the stack
  std::vector<std::pair<Node*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      tape.order_.push_back(node);
      stack.pop_back();
    }
  }
  for (std::size_t i = 0; i < tape.order_.size(); ++i) tape.order_[i]->value.node_id = i + 1;
  return tape;
}

void Tape::backward(const Buffer* seed) {
  if (order_.empty()) return;
  Node* root = order_.back();
  auto& g = root->value.ensure_grad();
  if (seed) {
    if (seed->size() != g.size()) throw ShapeError("backward seed size does not match the root");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += (*seed)[i];
  } else {
    for (auto& x : g) x += 1.0;
  }
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->value.grad) n->backward(*n);
  }
}

void backward(const Var& root) { Tape::record(root).backward(); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

}  // namespace dhsense

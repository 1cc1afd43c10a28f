#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "v2st/numerics/tensor.hpp"

namespace v2st::inline V2ST_REAL_NS {

namespace detail {

struct Node {
  Tensor value;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's gradient and accumulates into the parents' gradients.
  std::function<void(Node&)> backward;
};

}  // namespace detail

// Handle to a node of a dynamically built computation graph. Copies share the
// node. Leaves created with `parameter` accumulate gradients across backward
// calls until zeroed.
class Var {
 public:
  Var() = default;

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  // Mutable access is meant for optimizers and initializers; mutating an
  // interior node after a forward pass invalidates its graph.
  Tensor& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  int rows() const { return node_->value.rows(); }
  int cols() const { return node_->value.cols(); }
  Real item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  std::span<const Real> grad() const { return node_->value.grad(); }
  std::span<Real> mutable_grad() { return node_->value.grad(); }
  void zero_grad() { node_->value.zero_grad(); }

  // Reverse-mode pass from a scalar. Seeds d(self)/d(self) = 1.
  void backward() const;

  detail::Node* node() const { return node_.get(); }

  // Builds an interior node. When gradient recording is off or no parent
  // requires a gradient, the result is a constant and `backward` is dropped.
  static Var make(Tensor value, std::vector<Var> parents, std::function<void(detail::Node&)> backward);

 private:
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on this thread for the guard's lifetime.
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

}  // namespace v2st::inline V2ST_REAL_NS

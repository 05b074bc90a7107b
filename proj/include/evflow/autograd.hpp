#pragma once

// Minimal reverse-mode differentiation over Tensor values. A Var is a handle
// to a graph node; ops record their inputs and a backward closure only when
// gradient tracking is enabled and at least one input requires a gradient.

#include <functional>
#include <memory>
#include <vector>

#include "evflow/tensor.hpp"

namespace evflow::ag {

struct Node {
  Tensor value;
  Tensor grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  Tensor& grad_buffer() {
    if (grad.empty() && !value.empty()) grad = Tensor::zeros_like(value);
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Var constant(Tensor value);
  static Var parameter(Tensor value);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::vector<int>& shape() const { return node_->value.shape(); }
  void zero_grad();

  // Same value, cut from the graph.
  Var detach() const { return constant(value()); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Scoped switch that disables graph recording on the current thread.
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

// Builds a node from `value` whose backward is `fn` when any input needs grad.
Var make_op(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn);

// Accumulates d(root)/d(leaf) into every reachable node that requires grad.
// `root` must be a scalar (single element).
void backward(const Var& root);

// --- ops -----------------------------------------------------------------

// 2-D convolution, x: C x H x W, weight: O x C x k x k, bias: O (may be undefined).
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
// scale * x + shift, elementwise.
Var affine(const Var& x, double scale, double shift);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var relu(const Var& x);
Var concat(const std::vector<Var>& parts);
Var resize_bilinear(const Var& x, int out_h, int out_w);
Var sum(const Var& x);

}  // namespace evflow::ag

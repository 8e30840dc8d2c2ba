#pragma once

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// Layout is row-major. Image-like tensors are [C, H, W]; element (c, j, i)
// lives at (c * H + j) * W + i, where i is the horizontal (column) index and
// j the vertical (row) index.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sca {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::uint64_t seq = 0;     // creation order on this thread's tape
  std::vector<NodePtr> inputs;
  BackwardFn backward;

  // Zero-initialised on first use.
  std::vector<double>& grad_buffer();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v);

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Shape& shape() const;
  int rank() const { return static_cast<int>(shape().size()); }
  int dim(int axis) const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  // Writable access. Only optimizers and initialisers should mutate values of
  // tensors that participate in a live graph.
  std::span<double> mutable_data() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  // Empty span when no gradient has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad();

  double item() const;
  double at(std::size_t flat) const { return node_->value[flat]; }
  double at(int c, int j, int i) const;  // rank-3 [C,H,W]
  double at(int j, int i) const;         // rank-2 [H,W]

  // Same values, no graph history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  Node* node() const noexcept { return node_.get(); }
  const NodePtr& node_ptr() const noexcept { return node_; }

  static Tensor from_node(NodePtr n);

 private:
  NodePtr node_;
};

// Thread-local switch for graph recording. Inference and frozen-network
// evaluation run under a NoGradGuard.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Builds an op result. The backward closure is recorded only when grad mode
// is on and at least one input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::vector<Tensor> inputs, BackwardFn backward);

// Gradient buffer of input k of `self`, or nullptr when that input does not
// require a gradient.
std::vector<double>* input_grad(Node& self, std::size_t k);

// Populates .grad on every requires_grad tensor reachable from `loss`.
// Nodes are processed in strictly decreasing creation order, so
// accumulation order is fixed. The graph is released afterwards.
void backward(const Tensor& loss);

}  // namespace sca

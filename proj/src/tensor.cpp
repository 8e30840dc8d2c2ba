#include "sca/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "sca/errors.hpp"

namespace sca {

namespace {

thread_local std::uint64_t g_next_seq = 1;
thread_local bool g_grad_enabled = true;

NodePtr new_node(Shape shape, std::vector<double> value) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->seq = g_next_seq++;
  return n;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw InvalidArgument("negative dimension in shape " + shape_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "," : "") << shape[k];
  os << ']';
  return os.str();
}

std::vector<double>& Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor::Tensor(Shape shape, double fill) {
  const std::size_t n = shape_numel(shape);
  node_ = new_node(std::move(shape), std::vector<double>(n, fill));
}

Tensor::Tensor(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != values.size()) {
    throw InvalidArgument("tensor data length " + std::to_string(values.size()) +
                          " does not match shape " + shape_string(shape));
  }
  node_ = new_node(std::move(shape), std::move(values));
}

Tensor Tensor::scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

Tensor Tensor::from_node(NodePtr n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw InvalidArgument("use of an undefined tensor");
  return node_->shape;
}

int Tensor::dim(int axis) const {
  const Shape& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw InvalidArgument("axis out of range for shape " + shape_string(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

double Tensor::item() const {
  if (numel() != 1) throw InvalidArgument("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

double Tensor::at(int c, int j, int i) const {
  const Shape& s = node_->shape;
  return node_->value[(static_cast<std::size_t>(c) * s[1] + j) * s[2] + i];
}

double Tensor::at(int j, int i) const {
  return node_->value[static_cast<std::size_t>(j) * node_->shape[1] + i];
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   BackwardFn backward) {
  NodePtr n = new_node(std::move(shape), std::move(value));
  if (n->value.size() != shape_numel(n->shape)) {
    throw InvalidArgument("op produced " + std::to_string(n->value.size()) +
                          " values for shape " + shape_string(n->shape));
  }
  if (g_grad_enabled) {
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
      n->requires_grad = true;
      n->inputs.reserve(inputs.size());
      for (auto& t : inputs) n->inputs.push_back(t.node_ptr());
      n->backward = std::move(backward);
    }
  }
  return Tensor::from_node(std::move(n));
}

std::vector<double>* input_grad(Node& self, std::size_t k) {
  Node* in = self.inputs[k].get();
  if (!in || !in->requires_grad) return nullptr;
  return &in->grad_buffer();
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw InvalidArgument("backward() requires a scalar loss");
  }
  Node* root = loss.node();
  if (!root->requires_grad) return;

  // Owning references keep every node alive until the graph is released.
  std::vector<NodePtr> order;
  std::unordered_set<Node*> seen;
  std::vector<NodePtr> stack{loss.node_ptr()};
  seen.insert(root);
  while (!stack.empty()) {
    NodePtr n = std::move(stack.back());
    stack.pop_back();
    for (const auto& in : n->inputs) {
      if (in && in->requires_grad && seen.insert(in.get()).second) stack.push_back(in);
    }
    order.push_back(std::move(n));
  }
  std::sort(order.begin(), order.end(), [](const NodePtr& a, const NodePtr& b) { return a->seq > b->seq; });

  root->grad_buffer()[0] += 1.0;
  for (const auto& n : order) {
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (const auto& n : order) {
    if (n->backward) {
      n->backward = nullptr;
      n->inputs.clear();
    }
  }
}

}  // namespace sca

#include "sgg/num/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <unordered_set>

#include "sgg/error.hpp"

namespace sgg::num {
namespace {

std::atomic<std::uint64_t> g_next_seq{1};

NodePtr new_node(Shape shape, std::vector<double> value, bool requires_grad) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape));
  }
  if (shape_size(shape) != value.size()) {
    throw DimensionError("data length " + std::to_string(value.size()) + " does not match shape " +
                         shape_string(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  n->seq = g_next_seq.fetch_add(1, std::memory_order_relaxed);
  return n;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(new_node(std::move(shape), std::vector<double>(n, v), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  return Tensor(new_node(std::move(shape), std::move(data), requires_grad));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
  Shape s{data.size()};
  return from(std::move(s), std::move(data), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape()));
  }
  return node_->shape[axis];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_string(shape()));
  return node_->value[0];
}

std::vector<double> Tensor::grad() const {
  if (node_->grad.empty()) return std::vector<double>(size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() { node_->grad.clear(); }

std::span<double> Tensor::mutable_data() {
  if (!node_->is_leaf()) throw std::logic_error("mutable_data() on a non-leaf tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  auto n = new_node(std::move(shape), std::move(value), needs);
  if (needs) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Tensor(std::move(n));
}

ComputeTape ComputeTape::record(const Tensor& root) {
  ComputeTape tape;
  if (!root.defined() || !root.requires_grad()) return tape;
  std::unordered_set<const Node*> seen;
  std::vector<Node*> stack{root.node().get()};
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    tape.nodes_.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad) stack.push_back(p.get());
    }
  }
  std::sort(tape.nodes_.begin(), tape.nodes_.end(),
            [](const Node* a, const Node* b) { return a->seq < b->seq; });
  return tape;
}

std::vector<std::uint64_t> ComputeTape::backward_order() const {
  std::vector<std::uint64_t> out;
  out.reserve(nodes_.size());
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) out.push_back((*it)->seq);
  return out;
}

void ComputeTape::backward(const Tensor& root) const {
  if (nodes_.empty()) return;
  for (Node* n : nodes_) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  Node* r = root.node().get();
  r->ensure_grad();
  for (auto& g : r->grad) g += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = *it;
    if (!n->is_leaf() && n->backward) n->backward(*n);
  }
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward() on an undefined tensor");
  if (loss.size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw std::invalid_argument("backward(): loss does not depend on any requires_grad tensor");
  }
  ComputeTape::record(loss).backward(loss);
}

}  // namespace sgg::num

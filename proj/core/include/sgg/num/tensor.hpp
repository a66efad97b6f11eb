#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sgg::num {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One recorded value in the computation. Leaves have no parents; interior
// nodes carry a backward closure that reads `grad` and accumulates into the
// parents' grads.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::uint64_t seq = 0;     // creation order; strictly increasing
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;

  void ensure_grad();
  bool is_leaf() const { return parents.empty(); }
};

// Value-semantic handle to a node. Copies alias the same node, so a
// parameter tensor can be shared between the optimizer and many graphs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor vector(std::vector<double> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Zero-filled view when no gradient has been accumulated.
  std::vector<double> grad() const;
  void zero_grad();

  // Leaf-only mutation, used by optimizers and checkpoint loading.
  std::span<double> mutable_data();
  std::span<double> mutable_grad();

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Builds an op result. If no parent requires grad the result is a constant
// leaf and the backward closure is dropped.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward);

// Ordered record of the differentiable operations reachable from a root.
// Nodes are kept in creation order, which is a topological order, so
// replaying in reverse is a valid reverse-mode sweep.
class ComputeTape {
 public:
  static ComputeTape record(const Tensor& root);

  std::size_t size() const { return nodes_.size(); }
  // Sequence numbers in backward visiting order (descending).
  std::vector<std::uint64_t> backward_order() const;
  // Clears interior grads, seeds d(root)/d(root) = 1 and sweeps backward.
  // Leaf grads accumulate across calls until zero_grad().
  void backward(const Tensor& root) const;

 private:
  std::vector<Node*> nodes_;
};

// Reverse-mode sweep from a scalar loss. Throws DimensionError on a
// non-scalar loss and std::invalid_argument if the loss is not on a tape.
void backward(const Tensor& loss);

}  // namespace sgg::num

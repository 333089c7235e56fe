#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "seqcast/error.hpp"

namespace seqcast {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

// One named dense tensor with persistent storage. Gradients live beside the
// values; an empty grad vector means "no gradient populated".
struct Parameter {
  std::string name;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool trainable = true;

  std::size_t numel() const { return value.size(); }
  bool has_grad() const { return !grad.empty(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
  void clear_grad() { grad.clear(); }
};

struct Node {
  Tape* tape = nullptr;
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool needs_grad = false;
  std::function<void()> backward;
  Parameter* param = nullptr;
};

// Lightweight handle to a tape node.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Node* n) : node_(n) {}

  bool defined() const { return node_ != nullptr; }
  Node* node() const { return node_; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->value.size(); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t rows() const { return node_->shape.at(0); }
  std::size_t cols() const { return node_->shape.at(1); }
  const std::vector<double>& values() const { return node_->value; }
  double scalar() const {
    if (node_->value.size() != 1)
      throw numeric_error("scalar() on tensor of shape " + shape_str(node_->shape));
    return node_->value[0];
  }

private:
  Node* node_ = nullptr;
};

// Reverse-mode tape. Nodes are created in topological order by construction;
// backward walks the creation order in reverse. A tape is built fresh for
// every forward pass and owns all of its intermediate storage.
class Tape {
public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Tensor constant(Shape shape, std::vector<double> data);
  Tensor constant_scalar(double v) { return constant({1}, {v}); }
  Tensor leaf(Parameter& p);

  // Allocates an output node; grad storage is allocated when tracked.
  Node* make(Shape shape, bool needs_grad);

  // Seeds grad with 1 at the scalar root and propagates. Parameter leaves
  // accumulate into Parameter::grad.
  void backward(const Tensor& root);

  std::size_t node_count() const { return nodes_.size(); }

  void seed_rng(std::uint64_t seed) { rng_.seed(seed); }
  std::uint64_t rng_bits() { return rng_(); }

private:
  std::deque<Node> nodes_;
  bool grad_enabled_;
  std::mt19937_64 rng_{0};
};

} // namespace seqcast

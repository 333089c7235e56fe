#include "seqcast/tensor.hpp"

#include <sstream>

namespace seqcast {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << "x";
    os << s[i];
  }
  os << "]";
  return os.str();
}

Tensor Tape::constant(Shape shape, std::vector<double> data) {
  if (shape_numel(shape) != data.size())
    throw numeric_error("constant data length " + std::to_string(data.size()) +
                        " does not match shape " + shape_str(shape));
  Node* n = make(std::move(shape), false);
  n->value = std::move(data);
  return Tensor(n);
}

Tensor Tape::leaf(Parameter& p) {
  bool track = grad_enabled_ && p.trainable;
  Node* n = make(p.shape, track);
  n->value = p.value;
  n->param = &p;
  if (track) {
    Node* self = n;
    Parameter* param = &p;
    n->backward = [self, param]() {
      param->ensure_grad();
      for (std::size_t i = 0; i < self->grad.size(); ++i)
        param->grad[i] += self->grad[i];
    };
  }
  return Tensor(n);
}

Node* Tape::make(Shape shape, bool needs_grad) {
  nodes_.emplace_back();
  Node* n = &nodes_.back();
  n->tape = this;
  n->shape = std::move(shape);
  n->value.assign(shape_numel(n->shape), 0.0);
  n->needs_grad = needs_grad && grad_enabled_;
  if (n->needs_grad) n->grad.assign(n->value.size(), 0.0);
  return n;
}

void Tape::backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1)
    throw numeric_error("backward requires a scalar root");
  if (!grad_enabled_)
    throw numeric_error("backward on a tape built with gradients disabled");
  Node* rn = root.node();
  if (!rn->needs_grad) return; // nothing tracked below the root
  rn->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->needs_grad && it->backward) it->backward();
  }
}

} // namespace seqcast

#include "qw/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "qw/error.hpp"

namespace qw {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require(data_.size() == shape_size(shape_), ErrorKind::shape_mismatch,
          "tensor data length " + std::to_string(data_.size()) +
              " does not match shape " + shape_str(shape_));
}

double Tensor::item() const {
  require(data_.size() == 1, ErrorKind::shape_mismatch,
          "item() on tensor of shape " + shape_str(shape_));
  return data_[0];
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  require(p.value.all_finite(), ErrorKind::non_finite,
          "parameter '" + p.name + "' holds non-finite values");
  Node n;
  n.value = p.value;
  n.requires_grad = grad_enabled_;
  n.param = grad_enabled_ ? &p : nullptr;
  Var v = push(std::move(n));
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn,
                 const char* op_name) {
  return record(std::move(value), std::vector<Var>(inputs), std::move(fn), op_name);
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn fn,
                 const char* op_name) {
  for (const auto& in : inputs) {
    require(in.valid() && &in.tape() == this, ErrorKind::tape_state,
            std::string(op_name) + ": input recorded on a different tape");
  }
  if (!value.all_finite()) {
    fail(ErrorKind::non_finite, std::string(op_name) + " produced a non-finite value");
  }
  Node n;
  n.value = std::move(value);
  if (grad_enabled_) {
    for (const auto& in : inputs) {
      if (nodes_[in.id()].requires_grad) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Tensor& Tape::grad(const Var& v) {
  Node& n = nodes_[v.id()];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Tape::grad_of(const Var& v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

void Tape::backward(const Var& root) {
  require(!consumed_, ErrorKind::tape_state,
          "backward already ran on this tape; rebuild the forward pass");
  require(root.valid() && &root.tape() == this, ErrorKind::tape_state,
          "backward root belongs to another tape");
  require(root.size() == 1, ErrorKind::shape_mismatch,
          "backward needs a scalar root, got shape " + shape_str(root.shape()));
  consumed_ = true;
  if (!nodes_[root.id()].requires_grad) return;
  grad(root).fill(1.0);
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.requires_grad) continue;
    if (n.param != nullptr) {
      auto& pg = n.param->grad;
      if (pg.shape() != n.value.shape()) pg = Tensor(n.value.shape());
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += n.grad[k];
    } else if (n.backward) {
      n.backward(*this, n.value, n.grad);
    }
  }
}

}  // namespace qw

#include "mwafm/tape.hpp"

#include <string>

#include "mwafm/error.hpp"

namespace mwafm {

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), false, true, {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back(Node{"variable", std::move(value), true, true, {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward fn) {
  return record(op, std::move(value), std::vector<Var>(inputs), std::move(fn));
}

Var Tape::record(const char* op, Tensor value, const std::vector<Var>& inputs, Backward fn) {
  if (!value.all_finite()) throw NumericError(std::string("non-finite value produced by ") + op);
  bool needs = false;
  for (const Var& in : inputs) {
    if (in.tape != this) throw Error(std::string(op) + ": operand recorded on a different tape");
    needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{op, std::move(value), needs, false, needs ? std::move(fn) : Backward{}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (!n.grad_allocated) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.grad_allocated = true;
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.id >= nodes_.size()) throw Error("backward: loss is not recorded on this tape");
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.numel() != 1) throw DimensionError("backward: loss must be scalar, got " + shape_string(lv.shape()));
  if (!nodes_[loss.id].requires_grad) return;

  grad_buffer(loss.id)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.grad_allocated || !n.backward) continue;
    // Inputs precede the node, so the callback never touches this buffer.
    n.backward(n.grad, *this);
    if (!n.leaf) {
      n.grad = Tensor();
      n.grad_allocated = false;
    }
  }
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad_allocated) return n.grad;
  return Tensor(n.value.shape(), 0.0);
}

bool Tape::has_grad(Var v) const { return nodes_.at(v.id).grad_allocated; }

}  // namespace mwafm

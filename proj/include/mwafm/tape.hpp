#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "mwafm/tensor.hpp"

namespace mwafm {

class Tape;

/// Handle to a tensor recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
};

/// Reverse-mode gradient tape.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it.
/// A node only keeps a backward rule when at least one input needs a gradient;
/// with no variables on the tape nothing beyond the forward values is stored.
/// A tape must stay on one thread.
class Tape {
 public:
  /// Receives the gradient of the node output and accumulates into inputs.
  using Backward = std::function<void(const Tensor& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf whose gradient is retained by `backward`.
  Var variable(Tensor value);

  /// Appends an op result. `inputs` decide whether `fn` is kept.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward fn);
  Var record(const char* op, Tensor value, const std::vector<Var>& inputs, Backward fn);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient buffer of node `id`, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

  /// Runs reverse accumulation from a scalar loss.
  void backward(Var loss);

  /// Gradient of a node after `backward`; zeros when the loss does not reach it.
  Tensor grad(Var v) const;
  bool has_grad(Var v) const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    Tensor value;
    bool requires_grad = false;
    bool leaf = false;
    Backward backward;
    Tensor grad;
    bool grad_allocated = false;
  };

  std::deque<Node> nodes_;  // stable addresses: values are referenced while recording
};

}  // namespace mwafm

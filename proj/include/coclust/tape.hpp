#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "coclust/tensor.hpp"

namespace coclust {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

/// Reverse-mode computation record. Every primitive pushes its output with a
/// closure that reads the output gradient and accumulates into its inputs.
/// Single owner; not thread safe.
class Tape {
 public:
  using Backward = std::function<void(Tape&, Var self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A value that never receives gradient.
  Var constant(Tensor value);
  /// Leaf bound to an external parameter. backward() adds the leaf gradient
  /// into param.grad() when param.requires_grad() is set.
  Var parameter(Tensor& param);

  Var push(Tensor value, const std::vector<Var>& parents, Backward backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }
  /// Gradient buffer of v, allocated as zeros on first use.
  std::vector<double>& grad(Var v);
  bool has_grad(Var v) const { return !nodes_[v.id].grad.empty(); }

  /// Seeds d(loss)/d(loss) = 1 and replays in reverse order. loss must hold
  /// exactly one element. Each bound parameter receives its gradient once.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    Backward backward;
    Tensor* bound = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

}  // namespace coclust

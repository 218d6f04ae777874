#include "coclust/tape.hpp"

#include "coclust/error.hpp"

namespace coclust {

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Tensor& param) {
  nodes_.push_back(Node{Tensor(param.shape(), param.storage()), {}, {}, &param, param.requires_grad()});
  return Var{nodes_.size() - 1};
}

Var Tape::push(Tensor value, const std::vector<Var>& parents, Backward backward) {
  bool needs = false;
  for (Var p : parents) needs = needs || nodes_[p.id].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, nullptr,
                        needs});
  return Var{nodes_.size() - 1};
}

std::vector<double>& Tape::grad(Var v) {
  Node& node = nodes_[v.id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) {
    throw UsageError("backward() needs a single-element loss, got shape " +
                     value(loss).shape_string());
  }
  grad(loss)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.needs_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, Var{i});
  }
  for (Node& node : nodes_) {
    if (node.bound == nullptr || !node.needs_grad || node.grad.empty()) continue;
    std::span<double> target = node.bound->grad();
    for (std::size_t k = 0; k < target.size(); ++k) target[k] += node.grad[k];
  }
}

}  // namespace coclust

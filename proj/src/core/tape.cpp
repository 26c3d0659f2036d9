#include "neurop/core/tape.hpp"

#include <string>

#include "neurop/core/error.hpp"

namespace neurop {

const Tensor& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (consumed_) throw TapeError("cannot record on a tape after backward()");
  nodes_.push_back(Node{"leaf", std::move(value), {}, {}, requires_grad});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> parents, BackwardFn backward) {
  if (consumed_) throw TapeError("cannot record on a tape after backward()");
  Node node{op, std::move(value), {}, {}, false};
  node.parents.reserve(parents.size());
  for (const auto& p : parents) {
    if (&p.tape() != this) throw TapeError(std::string(op) + ": operand recorded on a different tape");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || nodes_[p.id()].requires_grad;
  }
  // Closures often capture operand values; drop them when nothing upstream
  // needs a gradient.
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& loss) {
  if (consumed_) throw TapeError("backward() already ran on this tape");
  if (&loss.tape() != this) throw TapeError("loss was recorded on a different tape");
  const Tensor& lv = nodes_.at(loss.id()).value;
  if (lv.size() != 1) throw ShapeError("backward() needs a scalar loss, got shape " + to_string(lv.shape()));
  consumed_ = true;

  grads_.assign(nodes_.size(), std::nullopt);
  grads_[loss.id()] = Tensor(lv.shape(), 1.0);

  std::vector<Tensor*> targets;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!grads_[id] || !node.backward) continue;
    targets.assign(node.parents.size(), nullptr);
    for (std::size_t i = 0; i < node.parents.size(); ++i) {
      const std::size_t p = node.parents[i];
      if (!nodes_[p].requires_grad) continue;
      if (!grads_[p]) grads_[p] = Tensor(nodes_[p].value.shape(), 0.0);
      targets[i] = &*grads_[p];
    }
    node.backward(*grads_[id], targets);
    node.backward = nullptr;
  }
}

Tensor Tape::gradient(const Var& v) const {
  if (!consumed_) throw TapeError("gradient() requested before backward()");
  const auto& g = grads_.at(v.id());
  if (g) return *g;
  return Tensor(nodes_.at(v.id()).value.shape(), 0.0);
}

}  // namespace neurop

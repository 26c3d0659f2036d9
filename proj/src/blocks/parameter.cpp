#include "neurop/blocks/parameter.hpp"

#include "neurop/core/error.hpp"

namespace neurop::blocks {

Parameter uniform_parameter(std::string name, Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return Parameter{std::move(name), std::move(t)};
}

Parameter constant_parameter(std::string name, Shape shape, double value) {
  return Parameter{std::move(name), Tensor(std::move(shape), value)};
}

ForwardContext::ForwardContext(Tape& tape, Predicate trainable) : tape_(&tape), trainable_(std::move(trainable)) {}

ForwardContext ForwardContext::inference(Tape& tape) {
  ForwardContext ctx(tape);
  ctx.record_gradients_ = false;
  return ctx;
}

bool ForwardContext::is_trainable(const Parameter& p) const {
  if (!record_gradients_) return false;
  return !trainable_ || trainable_(p.name);
}

Var ForwardContext::bind(const Parameter& p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return it->second;
  Var v = tape_->leaf(p.value, is_trainable(p));
  bound_.emplace(&p, v);
  return v;
}

void ForwardContext::bind_to(const Parameter& p, Var v) {
  if (v.shape() != p.value.shape()) {
    throw ShapeError("binding " + p.name + ": shape " + to_string(v.shape()) + " != " + to_string(p.value.shape()));
  }
  bound_[&p] = v;
}

Tensor ForwardContext::gradient(const Parameter& p) const {
  auto it = bound_.find(&p);
  if (it == bound_.end()) return Tensor(p.value.shape(), 0.0);
  return tape_->gradient(it->second);
}

}  // namespace neurop::blocks

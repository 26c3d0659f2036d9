#pragma once

#include <deque>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "neurop/core/tensor.hpp"

namespace neurop {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape.
///
/// Nodes are appended in evaluation order, so every parent precedes its
/// children and a reverse sweep is a valid topological order. A tape supports
/// exactly one backward pass; a second call throws TapeError. Not thread-safe:
/// use one tape per thread.
class Tape {
 public:
  /// Receives the gradient of the node's output and one accumulation target
  /// per parent. Targets are null for parents that do not require gradients,
  /// so implementations can skip that work entirely.
  using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> parent_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var leaf(const Tensor& value) { return leaf(value, value.requires_grad()); }
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var record(std::string_view op, Tensor value, std::vector<Var> parents, BackwardFn backward);

  void backward(const Var& loss);

  /// Gradient of the loss with respect to v after backward(). Nodes the
  /// loss does not depend on get a zero tensor of matching shape.
  Tensor gradient(const Var& v) const;

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::string_view op(std::size_t id) const { return nodes_.at(id).op; }
  std::span<const std::size_t> parents(std::size_t id) const { return nodes_.at(id).parents; }

  std::size_t size() const noexcept { return nodes_.size(); }
  bool consumed() const noexcept { return consumed_; }

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;  // stable references across appends
  std::vector<std::optional<Tensor>> grads_;
  bool consumed_ = false;
};

}  // namespace neurop

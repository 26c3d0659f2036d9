#pragma once

// Runs a batched block on one GridField without recording gradients.

#include <utility>

#include "neurop/blocks/grid_field.hpp"
#include "neurop/blocks/parameter.hpp"

namespace neurop::blocks::detail {

template <typename Fn>
GridField apply_single(const GridField& v, Fn&& fn) {
  Shape batched{1};
  batched.insert(batched.end(), v.values.shape().begin(), v.values.shape().end());
  Tape tape;
  ForwardContext ctx = ForwardContext::inference(tape);
  Var x = tape.constant(v.values.reshaped(batched));
  Var y = std::forward<Fn>(fn)(ctx, x);
  const Shape& ys = y.value().shape();
  return GridField(v.grid, y.value().reshaped(Shape(ys.begin() + 1, ys.end())));
}

}  // namespace neurop::blocks::detail

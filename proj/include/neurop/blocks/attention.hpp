#pragma once

#include <cstddef>

#include "neurop/core/tape.hpp"

namespace neurop::blocks {

/// softmax(Q·Kᵀ/√d)·V over token matrices.
///
/// Operands are (tokens, features) or (batch, tokens, features). Features
/// are split evenly into `heads` groups, each attending independently with
/// d the per-head width.
Var attention(const Var& q, const Var& k, const Var& v, std::size_t heads = 1);

/// Attention weights for single-head attention, (…, Nq, Nk).
Tensor attention_weights(const Tensor& q, const Tensor& k);

}  // namespace neurop::blocks

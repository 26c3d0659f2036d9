#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>

#include "neurop/blocks/parameter.hpp"

namespace neurop::train {

struct AdamSettings {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moments and step count of one parameter.
struct Moments {
  Tensor first;
  Tensor second;
  std::uint64_t steps = 0;
};

/// Adam state keyed by parameter name, so the shared core and each task's
/// adapter keep separate step counters.
struct OptimizerState {
  AdamSettings settings;
  std::map<std::string, Moments> moments;
};

/// One bias-corrected Adam update of `params` with `grads` (same order and
/// shapes). Throws NumericalError on a non-finite gradient before touching
/// any parameter.
void adam_step(OptimizerState& state, std::span<blocks::Parameter* const> params, std::span<const Tensor> grads,
               double lr);

/// Scales `grads` in place so their global L2 norm is at most `max_norm`;
/// returns the norm before scaling. max_norm <= 0 disables clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace neurop::train

#pragma once

#include <cstddef>

#include "neurop/blocks/grid_field.hpp"
#include "neurop/pde/dataset.hpp"
#include "neurop/transfer/model.hpp"

namespace neurop::transfer {

inline constexpr double nmae_epsilon = 1e-8;

/// Mean over samples and output channels of mean|pred - target| divided by
/// (max target - min target + eps), the range taken per sample and channel.
/// Inputs are (B, C, *grid); the result is a fraction, not a percentage.
double nmae(const Tensor& pred, const Tensor& target, double eps = nmae_epsilon);
double nmae(const blocks::GridField& pred, const blocks::GridField& target, double eps = nmae_epsilon);
double mse(const Tensor& pred, const Tensor& target);

struct EvalMetrics {
  double mse = 0.0;
  double nmae = 0.0;
  std::size_t samples = 0;
  std::size_t parameters = 0;
};

EvalMetrics evaluate(const ComposedModel& model, const pde::Dataset& data, std::size_t batch_size = 32);

}  // namespace neurop::transfer

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "neurop/core/tape.hpp"

namespace neurop {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-5;
  /// Per-coordinate error is |analytic − numeric| / max(|analytic|, |numeric|, abs_floor),
  /// so coordinates whose true gradient is ~0 are judged on an absolute scale.
  double abs_floor = 1e-5;
};

struct GradCheckReport {
  /// Relative error per input, flattened in input order.
  std::vector<std::vector<double>> errors;
  double max_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  bool passed = false;

  std::string summary() const;
};

/// Scalar-valued function of tape variables, evaluated on a fresh tape.
using TapeFunction = std::function<Var(Tape&, std::span<const Var>)>;

/// Compare reverse-mode gradients of f against central differences, for
/// every coordinate of every input.
GradCheckReport grad_check(const TapeFunction& f, const std::vector<Tensor>& inputs, const GradCheckOptions& options = {});

GradCheckReport grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x,
                           const GradCheckOptions& options = {});

}  // namespace neurop

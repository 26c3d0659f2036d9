#include "neurop/train/optimizer.hpp"

#include <cmath>

#include "neurop/core/error.hpp"

namespace neurop::train {

void adam_step(OptimizerState& state, std::span<blocks::Parameter* const> params, std::span<const Tensor> grads,
               double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->value.shape()) {
      throw ShapeError("adam_step: gradient of " + params[i]->name + " has shape " + to_string(grads[i].shape()));
    }
    if (!grads[i].all_finite()) throw NumericalError("non-finite gradient for " + params[i]->name);
  }
  const auto& s = state.settings;
  for (std::size_t i = 0; i < params.size(); ++i) {
    blocks::Parameter& p = *params[i];
    auto [it, fresh] = state.moments.try_emplace(p.name);
    Moments& m = it->second;
    if (fresh) {
      m.first = Tensor(p.value.shape());
      m.second = Tensor(p.value.shape());
    }
    ++m.steps;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(m.steps));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(m.steps));
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < g.size(); ++k) {
      m.first[k] = s.beta1 * m.first[k] + (1.0 - s.beta1) * g[k];
      m.second[k] = s.beta2 * m.second[k] + (1.0 - s.beta2) * g[k] * g[k];
      p.value[k] -= lr * (m.first[k] / c1) / (std::sqrt(m.second[k] / c2) + s.epsilon);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double ss = 0.0;
  for (const Tensor& g : grads) {
    for (double x : g.data()) ss += x * x;
  }
  const double norm = std::sqrt(ss);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& x : g.data()) x *= scale;
    }
  }
  return norm;
}

}  // namespace neurop::train

#include "neurop/transfer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neurop/core/error.hpp"

namespace neurop::transfer {

namespace {

void check_pair(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("prediction " + neurop::to_string(pred.shape()) + " and target " + neurop::to_string(target.shape()) +
                     " differ in shape");
  }
  if (pred.rank() < 2) throw ShapeError("metrics expect (B, C, *grid) arrays");
}

}  // namespace

double nmae(const Tensor& pred, const Tensor& target, double eps) {
  check_pair(pred, target);
  if (!(eps > 0.0)) throw ValueError("nmae epsilon must be positive");
  const std::size_t rows = pred.extent(0) * pred.extent(1), points = pred.size() / rows;
  const std::size_t samples = pred.extent(0);
  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double per_sample = 0.0;
    for (std::size_t c = 0; c < pred.extent(1); ++c) {
      const std::size_t r = s * pred.extent(1) + c;
      const double* p = pred.raw() + r * points;
      const double* t = target.raw() + r * points;
      double mae = 0.0, lo = t[0], hi = t[0];
      for (std::size_t i = 0; i < points; ++i) {
        mae += std::abs(p[i] - t[i]);
        lo = std::min(lo, t[i]);
        hi = std::max(hi, t[i]);
      }
      per_sample += mae / static_cast<double>(points) / (hi - lo + eps);
    }
    total += per_sample / static_cast<double>(pred.extent(1));
  }
  return total / static_cast<double>(samples);
}

double nmae(const blocks::GridField& pred, const blocks::GridField& target, double eps) {
  Shape s{1};
  s.insert(s.end(), pred.values.shape().begin(), pred.values.shape().end());
  Shape t{1};
  t.insert(t.end(), target.values.shape().begin(), target.values.shape().end());
  return nmae(pred.values.reshaped(s), target.values.reshaped(t), eps);
}

double mse(const Tensor& pred, const Tensor& target) {
  check_pair(pred, target);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += (pred[i] - target[i]) * (pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

EvalMetrics evaluate(const ComposedModel& model, const pde::Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) throw ValueError("cannot evaluate on an empty split");
  if (batch_size == 0) throw ValueError("batch size must be positive");
  if (data.manifest.task.n_in() != model.adapter().task.n_in() ||
      data.manifest.task.n_out() != model.adapter().task.n_out()) {
    throw ShapeError("dataset '" + data.manifest.task.id + "' does not match the channels of task '" +
                     model.adapter().task.id + "'");
  }
  EvalMetrics m;
  m.samples = data.size();
  m.parameters = model.parameter_count();
  double se = 0.0, nm = 0.0;
  std::size_t values = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.resize(std::min(batch_size, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor target = data.target_batch(idx);
    const Tensor pred = model.predict(data.input_batch(idx));
    se += mse(pred, target) * static_cast<double>(pred.size());
    nm += nmae(pred, target) * static_cast<double>(idx.size());
    values += pred.size();
  }
  m.mse = se / static_cast<double>(values);
  m.nmae = nm / static_cast<double>(data.size());
  return m;
}

}  // namespace neurop::transfer

#include "neurop/blocks/pointwise.hpp"

#include <cmath>

#include "neurop/core/error.hpp"
#include "neurop/core/ops.hpp"
#include "single.hpp"

namespace neurop::blocks {

PointwiseMLP::PointwiseMLP(std::string prefix, std::size_t in_channels, std::size_t hidden, std::size_t out_channels,
                           Rng& rng)
    : in_(in_channels), hidden_(hidden), out_(out_channels) {
  if (in_ == 0 || hidden_ == 0 || out_ == 0) throw ValueError(prefix + ": channel counts must be positive");
  const double b1 = 1.0 / std::sqrt(static_cast<double>(in_));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden_));
  w1_ = uniform_parameter(prefix + "/w1", {hidden_, in_}, b1, rng);
  b1_ = uniform_parameter(prefix + "/b1", {hidden_}, b1, rng);
  w2_ = uniform_parameter(prefix + "/w2", {out_, hidden_}, b2, rng);
  b2_ = uniform_parameter(prefix + "/b2", {out_}, b2, rng);
}

Var PointwiseMLP::forward(ForwardContext& ctx, const Var& x) const {
  Var h = gelu(channel_linear(x, ctx.bind(w1_), ctx.bind(b1_)));
  return channel_linear(h, ctx.bind(w2_), ctx.bind(b2_));
}

void PointwiseMLP::visit(const ParameterVisitor& f) {
  f(w1_);
  f(b1_);
  f(w2_);
  f(b2_);
}

void PointwiseMLP::visit(const ConstParameterVisitor& f) const {
  f(w1_);
  f(b1_);
  f(w2_);
  f(b2_);
}

std::size_t PointwiseMLP::parameter_count() const {
  return w1_.value.size() + b1_.value.size() + w2_.value.size() + b2_.value.size();
}

LiftingMap::LiftingMap(std::string task_id, std::string prefix, std::size_t in_channels, std::size_t width, Rng& rng)
    : task_id_(std::move(task_id)), mlp_(std::move(prefix), in_channels, width, width, rng) {}

Var LiftingMap::forward(ForwardContext& ctx, const Var& a) const {
  const Shape& s = a.shape();
  if (s.size() < 3 || s[1] != in_channels()) {
    throw ShapeError("lifting for task '" + task_id_ + "' expects " + std::to_string(in_channels()) +
                     " input channels, got shape " + to_string(s));
  }
  return mlp_.forward(ctx, a);
}

ProjectionMap::ProjectionMap(std::string task_id, std::string prefix, std::size_t width, std::size_t out_channels,
                             Rng& rng)
    : task_id_(std::move(task_id)), mlp_(std::move(prefix), width, width, out_channels, rng) {}

Var ProjectionMap::forward(ForwardContext& ctx, const Var& v) const {
  const Shape& s = v.shape();
  if (s.size() < 3 || s[1] != width()) {
    throw ShapeError("projection for task '" + task_id_ + "' expects " + std::to_string(width()) +
                     " hidden channels, got shape " + to_string(s));
  }
  return mlp_.forward(ctx, v);
}

GridField lift(const LiftingMap& map, const GridField& a) {
  return detail::apply_single(a, [&](ForwardContext& ctx, const Var& x) { return map.forward(ctx, x); });
}

GridField project(const ProjectionMap& map, const GridField& v) {
  return detail::apply_single(v, [&](ForwardContext& ctx, const Var& x) { return map.forward(ctx, x); });
}

}  // namespace neurop::blocks

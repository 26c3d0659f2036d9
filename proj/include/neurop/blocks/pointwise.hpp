#pragma once

#include <cstddef>
#include <string>

#include "neurop/blocks/grid_field.hpp"
#include "neurop/blocks/parameter.hpp"

namespace neurop::blocks {

/// Two-layer pointwise map, x -> W2·gelu(W1·x + b1) + b2, applied
/// independently at every grid location. Shared by lifting and projection.
class PointwiseMLP {
 public:
  PointwiseMLP() = default;
  PointwiseMLP(std::string prefix, std::size_t in_channels, std::size_t hidden, std::size_t out_channels, Rng& rng);

  std::size_t in_channels() const noexcept { return in_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t out_channels() const noexcept { return out_; }

  /// x: (B, in_channels, *grid).
  Var forward(ForwardContext& ctx, const Var& x) const;

  void visit(const ParameterVisitor& f);
  void visit(const ConstParameterVisitor& f) const;
  std::size_t parameter_count() const;

 private:
  std::size_t in_ = 0, hidden_ = 0, out_ = 0;
  Parameter w1_, b1_, w2_, b2_;
};

/// Lifts a task's input functions (plus coordinate channels) into the
/// shared hidden width.
class LiftingMap {
 public:
  LiftingMap() = default;
  /// `in_channels` counts everything fed to the map, coordinates included.
  LiftingMap(std::string task_id, std::string prefix, std::size_t in_channels, std::size_t width, Rng& rng);

  const std::string& task_id() const noexcept { return task_id_; }
  std::size_t in_channels() const noexcept { return mlp_.in_channels(); }
  std::size_t width() const noexcept { return mlp_.out_channels(); }

  Var forward(ForwardContext& ctx, const Var& a) const;
  void visit(const ParameterVisitor& f) { mlp_.visit(f); }
  void visit(const ConstParameterVisitor& f) const { mlp_.visit(f); }
  std::size_t parameter_count() const { return mlp_.parameter_count(); }

 private:
  std::string task_id_;
  PointwiseMLP mlp_;
};

/// Projects hidden features onto a task's output variables.
class ProjectionMap {
 public:
  ProjectionMap() = default;
  ProjectionMap(std::string task_id, std::string prefix, std::size_t width, std::size_t out_channels, Rng& rng);

  const std::string& task_id() const noexcept { return task_id_; }
  std::size_t width() const noexcept { return mlp_.in_channels(); }
  std::size_t out_channels() const noexcept { return mlp_.out_channels(); }

  Var forward(ForwardContext& ctx, const Var& v) const;
  void visit(const ParameterVisitor& f) { mlp_.visit(f); }
  void visit(const ConstParameterVisitor& f) const { mlp_.visit(f); }
  std::size_t parameter_count() const { return mlp_.parameter_count(); }

 private:
  std::string task_id_;
  PointwiseMLP mlp_;
};

GridField lift(const LiftingMap& map, const GridField& a);
GridField project(const ProjectionMap& map, const GridField& v);

}  // namespace neurop::blocks

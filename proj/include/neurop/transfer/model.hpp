#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurop/transfer/adapters.hpp"
#include "neurop/transfer/core.hpp"

namespace neurop::transfer {

/// A shared core together with every adapter attached to it.
class Model {
 public:
  Model() = default;
  Model(const CoreConfig& config, std::uint64_t seed);

  OperatorCore& core() noexcept { return core_; }
  const OperatorCore& core() const noexcept { return core_; }
  AdapterSet& adapters() noexcept { return adapters_; }
  const AdapterSet& adapters() const noexcept { return adapters_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Attach with the core's width; checks the task's dimensionality.
  Adapter& attach(const PhysicsTask& task, std::uint64_t seed, std::optional<pde::Normalization> stats = std::nullopt,
                  bool replace = false);

  /// Free-form record of training phases, stored in checkpoints.
  nlohmann::json& history() noexcept { return history_; }
  const nlohmann::json& history() const noexcept { return history_; }

  void visit(const blocks::ParameterVisitor& f);
  void visit(const blocks::ConstParameterVisitor& f) const;
  std::size_t parameter_count() const;

 private:
  std::uint64_t seed_ = 0;
  OperatorCore core_;
  AdapterSet adapters_;
  nlohmann::json history_ = nlohmann::json::array();
};

/// G = P ∘ F ∘ L for one task. Holds references into the model.
class ComposedModel {
 public:
  ComposedModel(const OperatorCore& core, const Adapter& adapter) : core_(&core), adapter_(&adapter) {}

  const Adapter& adapter() const noexcept { return *adapter_; }
  const OperatorCore& core() const noexcept { return *core_; }

  /// a: (B, n_in, *grid) raw inputs -> (B, n_out, *grid).
  Var forward(blocks::ForwardContext& ctx, const Tensor& a) const;
  /// Inference without gradients.
  Tensor predict(const Tensor& a) const;

  void visit(const blocks::ConstParameterVisitor& f) const;
  std::size_t parameter_count() const { return core_->parameter_count() + adapter_->parameter_count(); }

 private:
  const OperatorCore* core_;
  const Adapter* adapter_;
};

ComposedModel compose(const Model& model, const std::string& task_id);

/// Warm-starts the adapter of `target` from that of `source`. Lifting
/// columns are copied for input channels with matching names and for the
/// coordinate channels; other columns are zeroed. Projection rows are copied
/// for matching output names and keep their initialization otherwise.
void inherit_adapter(Model& model, const std::string& target, const std::string& source);

enum class Phase { pretrain, finetune, scratch };

std::string to_string(Phase p);
Phase phase_from_string(const std::string& name);

/// Which parameters a training phase may update.
struct TrainPhase {
  Phase phase = Phase::pretrain;
  std::vector<std::string> tasks;

  bool selects(const std::string& parameter_name) const;
  void validate() const;
};

std::vector<blocks::Parameter*> trainable_parameters(const TrainPhase& phase, Model& model);
std::size_t trainable_count(const TrainPhase& phase, const Model& model);

}  // namespace neurop::transfer

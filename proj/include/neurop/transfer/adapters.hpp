#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neurop/blocks/pointwise.hpp"
#include "neurop/pde/dataset.hpp"

namespace neurop::transfer {

/// A physics problem as seen by the model: its input and output channels
/// and its domain.
struct PhysicsTask {
  std::string id;
  std::vector<std::string> input_names;
  std::vector<std::string> output_names;
  std::vector<double> lengths;
  std::optional<pde::TaskSpec> generator;

  std::size_t n_in() const noexcept { return input_names.size(); }
  std::size_t n_out() const noexcept { return output_names.size(); }
  std::size_t dims() const noexcept { return lengths.size(); }
  void validate() const;

  static PhysicsTask from_spec(const pde::TaskSpec& spec);
};

void to_json(nlohmann::json& j, const PhysicsTask& t);
void from_json(const nlohmann::json& j, PhysicsTask& t);

/// Per-task lifting and projection. Inputs are standardized with the stored
/// statistics and coordinate channels are appended before lifting.
struct Adapter {
  PhysicsTask task;
  pde::Normalization stats;
  blocks::LiftingMap lift;
  blocks::ProjectionMap projection;

  void visit(const blocks::ParameterVisitor& f);
  void visit(const blocks::ConstParameterVisitor& f) const;
  std::size_t parameter_count() const { return lift.parameter_count() + projection.parameter_count(); }
};

class AdapterSet {
 public:
  /// Fresh adapter for `task` at hidden width `width`. Rejects an existing
  /// id unless `replace` is set.
  Adapter& attach(const PhysicsTask& task, std::size_t width, std::uint64_t seed,
                  std::optional<pde::Normalization> stats = std::nullopt, bool replace = false);

  bool contains(const std::string& id) const { return adapters_.count(id) > 0; }
  /// Throws ValueError naming the task when absent.
  const Adapter& at(const std::string& id) const;
  Adapter& at(const std::string& id);
  std::vector<std::string> ids() const;
  std::size_t size() const noexcept { return adapters_.size(); }

  void visit(const blocks::ParameterVisitor& f);
  void visit(const blocks::ConstParameterVisitor& f) const;

 private:
  std::map<std::string, Adapter> adapters_;
};

std::string adapter_prefix(const std::string& task_id);

}  // namespace neurop::transfer

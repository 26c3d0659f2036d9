#include "neurop/transfer/adapters.hpp"

#include "neurop/core/error.hpp"

namespace neurop::transfer {

std::string adapter_prefix(const std::string& task_id) { return "adapter/" + task_id + "/"; }

void PhysicsTask::validate() const {
  if (id.empty()) throw ValueError("task id must not be empty");
  if (id.find('/') != std::string::npos) throw ValueError("task id '" + id + "' must not contain '/'");
  if (input_names.empty()) throw ValueError("task '" + id + "' needs at least one input function");
  if (output_names.empty()) throw ValueError("task '" + id + "' needs at least one output");
  if (lengths.empty() || lengths.size() > 2) throw ValueError("task '" + id + "' must be 1-D or 2-D");
}

PhysicsTask PhysicsTask::from_spec(const pde::TaskSpec& spec) {
  PhysicsTask t;
  t.id = spec.id;
  t.input_names = spec.input_names();
  for (std::size_t f = 0; f < spec.frames(); ++f) {
    for (const auto& name : spec.output_names()) {
      t.output_names.push_back(spec.frames() > 1 ? name + "@" + std::to_string(f + 1) : name);
    }
  }
  t.lengths = spec.grid.lengths;
  t.generator = spec;
  return t;
}

void to_json(nlohmann::json& j, const PhysicsTask& t) {
  j = nlohmann::json{{"id", t.id}, {"inputs", t.input_names}, {"outputs", t.output_names}, {"lengths", t.lengths}};
  if (t.generator) j["generator"] = *t.generator;
}

void from_json(const nlohmann::json& j, PhysicsTask& t) {
  j.at("id").get_to(t.id);
  j.at("inputs").get_to(t.input_names);
  j.at("outputs").get_to(t.output_names);
  j.at("lengths").get_to(t.lengths);
  if (j.contains("generator")) t.generator = j.at("generator").get<pde::TaskSpec>();
}

void Adapter::visit(const blocks::ParameterVisitor& f) {
  lift.visit(f);
  projection.visit(f);
}

void Adapter::visit(const blocks::ConstParameterVisitor& f) const {
  lift.visit(f);
  projection.visit(f);
}

Adapter& AdapterSet::attach(const PhysicsTask& task, std::size_t width, std::uint64_t seed,
                            std::optional<pde::Normalization> stats, bool replace) {
  task.validate();
  if (contains(task.id) && !replace) throw ValueError("an adapter for task '" + task.id + "' is already attached");
  if (stats && (stats->mean.size() != task.n_in() || stats->stddev.size() != task.n_in())) {
    throw ShapeError("normalization for task '" + task.id + "' has the wrong channel count");
  }
  Rng rng(seed);
  const std::string prefix = adapter_prefix(task.id);
  Adapter a{task, stats.value_or(pde::Normalization::identity(task.n_in())),
            blocks::LiftingMap(task.id, prefix + "lift", task.n_in() + task.dims(), width, rng),
            blocks::ProjectionMap(task.id, prefix + "proj", width, task.n_out(), rng)};
  auto [it, inserted] = adapters_.insert_or_assign(task.id, std::move(a));
  return it->second;
}

const Adapter& AdapterSet::at(const std::string& id) const {
  auto it = adapters_.find(id);
  if (it == adapters_.end()) throw ValueError("no adapter attached for task '" + id + "'");
  return it->second;
}

Adapter& AdapterSet::at(const std::string& id) {
  return const_cast<Adapter&>(static_cast<const AdapterSet&>(*this).at(id));
}

std::vector<std::string> AdapterSet::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, a] : adapters_) out.push_back(id);
  return out;
}

void AdapterSet::visit(const blocks::ParameterVisitor& f) {
  for (auto& [id, a] : adapters_) a.visit(f);
}

void AdapterSet::visit(const blocks::ConstParameterVisitor& f) const {
  for (const auto& [id, a] : adapters_) a.visit(f);
}

}  // namespace neurop::transfer

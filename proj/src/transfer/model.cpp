#include "neurop/transfer/model.hpp"

#include <algorithm>
#include <map>
#include <optional>

#include "neurop/core/error.hpp"

namespace neurop::transfer {

Model::Model(const CoreConfig& config, std::uint64_t seed) : seed_(seed), core_(config, seed) {}

Adapter& Model::attach(const PhysicsTask& task, std::uint64_t seed, std::optional<pde::Normalization> stats,
                       bool replace) {
  if (task.dims() != core_.dims()) {
    throw ValueError("task '" + task.id + "' is " + std::to_string(task.dims()) + "-D but the core is " +
                     std::to_string(core_.dims()) + "-D");
  }
  return adapters_.attach(task, core_.width(), seed, std::move(stats), replace);
}

void Model::visit(const blocks::ParameterVisitor& f) {
  core_.visit(f);
  adapters_.visit(f);
}

void Model::visit(const blocks::ConstParameterVisitor& f) const {
  core_.visit(f);
  adapters_.visit(f);
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  visit(blocks::ConstParameterVisitor([&](const blocks::Parameter& p) { n += p.value.size(); }));
  return n;
}

Var ComposedModel::forward(blocks::ForwardContext& ctx, const Tensor& a) const {
  const Adapter& ad = *adapter_;
  const std::size_t dims = ad.task.dims();
  if (a.rank() != dims + 2 || a.extent(1) != ad.task.n_in()) {
    throw ShapeError("task '" + ad.task.id + "' expects (B, " + std::to_string(ad.task.n_in()) + ", " +
                     std::to_string(dims) + "-D grid) inputs, got " + neurop::to_string(a.shape()));
  }
  const Shape spatial(a.shape().begin() + 2, a.shape().end());
  core_->check_grid(spatial);
  Tensor x = a;
  const std::size_t points = numel(spatial), channels = ad.task.n_in();
  for (std::size_t b = 0; b < a.extent(0); ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = x.raw() + (b * channels + c) * points;
      const double m = ad.stats.mean[c], s = ad.stats.stddev[c];
      for (std::size_t i = 0; i < points; ++i) p[i] = (p[i] - m) / s;
    }
  }
  const blocks::Grid grid{spatial, ad.task.lengths};
  Var in = ctx.tape().constant(blocks::with_coordinates(x, grid));
  return ad.projection.forward(ctx, core_->forward(ctx, ad.lift.forward(ctx, in)));
}

Tensor ComposedModel::predict(const Tensor& a) const {
  Tape tape;
  auto ctx = blocks::ForwardContext::inference(tape);
  return forward(ctx, a).value();
}

void ComposedModel::visit(const blocks::ConstParameterVisitor& f) const {
  core_->visit(f);
  adapter_->visit(f);
}

ComposedModel compose(const Model& model, const std::string& task_id) {
  const Adapter& a = model.adapters().at(task_id);
  if (a.lift.width() != model.core().width()) {
    throw ShapeError("adapter for task '" + task_id + "' has width " + std::to_string(a.lift.width()) +
                     ", core has " + std::to_string(model.core().width()));
  }
  return ComposedModel(model.core(), a);
}

namespace {

std::map<std::string, blocks::Parameter*> adapter_parameters(Adapter& a) {
  std::map<std::string, blocks::Parameter*> out;
  const std::string prefix = adapter_prefix(a.task.id);
  a.visit(blocks::ParameterVisitor([&](blocks::Parameter& p) { out[p.name.substr(prefix.size())] = &p; }));
  return out;
}

std::optional<std::size_t> index_of(const std::vector<std::string>& names, const std::string& name) {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

void inherit_adapter(Model& model, const std::string& target, const std::string& source) {
  if (target == source) throw ValueError("adapter for task '" + target + "' cannot inherit from itself");
  Adapter& dst = model.adapters().at(target);
  Adapter& src = model.adapters().at(source);
  auto to = adapter_parameters(dst);
  auto from = adapter_parameters(src);
  for (const auto& [name, p] : to) {
    if (!from.count(name)) throw ValueError("adapter for task '" + source + "' has no parameter '" + name + "'");
  }
  const std::size_t in_dst = dst.task.n_in(), in_src = src.task.n_in();

  // Lifting: first layer by input column, the rest verbatim.
  {
    const Tensor& w = from.at("lift/w1")->value;
    Tensor& v = to.at("lift/w1")->value;
    const std::size_t hidden = v.extent(0), cd = v.extent(1), cs = w.extent(1);
    if (w.extent(0) != hidden) throw ShapeError("lifting hidden widths differ between '" + target + "' and '" + source + "'");
    for (std::size_t h = 0; h < hidden; ++h) {
      for (std::size_t c = 0; c < cd; ++c) {
        std::optional<std::size_t> s;
        if (c >= in_dst) s = in_src + (c - in_dst);
        else s = index_of(src.task.input_names, dst.task.input_names[c]);
        v.raw()[h * cd + c] = s ? w.raw()[h * cs + *s] : 0.0;
      }
    }
  }
  for (const char* name : {"lift/b1", "lift/w2", "lift/b2", "proj/w1", "proj/b1"}) {
    if (to.at(name)->value.shape() != from.at(name)->value.shape()) {
      throw ShapeError("adapter parameter '" + std::string(name) + "' differs in shape between '" + target +
                       "' and '" + source + "'");
    }
    to.at(name)->value = from.at(name)->value;
  }

  // Projection: output rows with matching names.
  const Tensor& w2 = from.at("proj/w2")->value;
  const Tensor& b2 = from.at("proj/b2")->value;
  Tensor& v2 = to.at("proj/w2")->value;
  Tensor& c2 = to.at("proj/b2")->value;
  const std::size_t hidden = v2.extent(1);
  for (std::size_t o = 0; o < dst.task.n_out(); ++o) {
    auto s = index_of(src.task.output_names, dst.task.output_names[o]);
    if (!s) continue;
    std::copy_n(w2.raw() + *s * hidden, hidden, v2.raw() + o * hidden);
    c2.raw()[o] = b2.raw()[*s];
  }
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::pretrain:
      return "pretrain";
    case Phase::finetune:
      return "finetune";
    case Phase::scratch:
      return "scratch";
  }
  return "unknown";
}

Phase phase_from_string(const std::string& name) {
  for (auto p : {Phase::pretrain, Phase::finetune, Phase::scratch}) {
    if (to_string(p) == name) return p;
  }
  throw ValueError("unknown training phase '" + name + "'");
}

bool TrainPhase::selects(const std::string& name) const {
  if (phase != Phase::finetune && name.rfind("core/", 0) == 0) return true;
  for (const auto& t : tasks) {
    if (name.rfind(adapter_prefix(t), 0) == 0) return true;
  }
  return false;
}

void TrainPhase::validate() const {
  if (tasks.empty()) throw ValueError(to_string(phase) + " phase needs at least one task");
  if (phase != Phase::pretrain && tasks.size() != 1) {
    throw ValueError(to_string(phase) + " phase trains exactly one task");
  }
}

std::vector<blocks::Parameter*> trainable_parameters(const TrainPhase& phase, Model& model) {
  std::vector<blocks::Parameter*> out;
  model.visit(blocks::ParameterVisitor([&](blocks::Parameter& p) {
    if (phase.selects(p.name)) out.push_back(&p);
  }));
  return out;
}

std::size_t trainable_count(const TrainPhase& phase, const Model& model) {
  std::size_t n = 0;
  model.visit(blocks::ConstParameterVisitor([&](const blocks::Parameter& p) {
    if (phase.selects(p.name)) n += p.value.size();
  }));
  return n;
}

}  // namespace neurop::transfer

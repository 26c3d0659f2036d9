#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <unordered_map>

#include "neurop/core/random.hpp"
#include "neurop/core/tape.hpp"

namespace neurop::blocks {

/// A named trainable array. Names are hierarchical ("core/fno/0/weight")
/// and double as checkpoint group names.
struct Parameter {
  std::string name;
  Tensor value;
};

using ParameterVisitor = std::function<void(Parameter&)>;
using ConstParameterVisitor = std::function<void(const Parameter&)>;

Parameter uniform_parameter(std::string name, Shape shape, double bound, Rng& rng);
Parameter constant_parameter(std::string name, Shape shape, double value);

/// Binds parameters to tape leaves for one forward pass.
///
/// Each parameter is registered at most once. Whether its leaf requires a
/// gradient is decided by the trainable predicate, so frozen parameters cost
/// nothing in the backward sweep.
class ForwardContext {
 public:
  using Predicate = std::function<bool(const std::string&)>;

  explicit ForwardContext(Tape& tape, Predicate trainable = {});

  /// Context that records no gradients at all (evaluation).
  static ForwardContext inference(Tape& tape);

  Tape& tape() noexcept { return *tape_; }
  Var bind(const Parameter& p);
  /// Use `v` wherever `p` is bound during this pass (gradient checks feed
  /// perturbed parameter values this way).
  void bind_to(const Parameter& p, Var v);
  bool is_bound(const Parameter& p) const { return bound_.count(&p) > 0; }
  bool is_trainable(const Parameter& p) const;

  /// Gradient after tape().backward(); zeros when the parameter was not used.
  Tensor gradient(const Parameter& p) const;

 private:
  Tape* tape_;
  Predicate trainable_;
  bool record_gradients_ = true;
  std::unordered_map<const Parameter*, Var> bound_;
};

}  // namespace neurop::blocks

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurop/core/random.hpp"
#include "neurop/pde/grid_spec.hpp"

namespace neurop::pde {

enum class TaskKind { advection, heat, heat_convection, burgers, gray_scott, rd_advection };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

/// Generator settings for one dataset family. Coefficients are drawn per
/// sample from their ranges; velocity components are drawn independently
/// per axis.
struct TaskSpec {
  std::string id;
  TaskKind kind = TaskKind::heat;
  GridSpec grid;
  double length_scale = 0.1;
  double amplitude = 0.5;
  Range nu{1e-3, 5e-3};
  Range velocity{-1.0, 1.0};
  Range feed{0.03, 0.05};
  Range kill{0.055, 0.065};
  double du = 2e-5;
  double dv = 1e-5;
  bool rollout = false;

  /// Names of the input channels: fields first, then constant coefficient
  /// channels.
  std::vector<std::string> input_names() const;
  std::vector<std::string> output_names() const;
  std::size_t n_in() const { return input_names().size(); }
  /// Output channels of a sample target, counting rollout frames.
  std::size_t n_out() const;
  std::size_t frames() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const TaskSpec& t);
void from_json(const nlohmann::json& j, TaskSpec& t);

/// One (a, u) pair: inputs (n_in, *grid), targets (n_out, *grid).
struct TrajectorySample {
  std::string task;
  Tensor inputs;
  Tensor targets;
  std::uint64_t seed = 0;
  std::vector<double> coefficients;
};

/// Draws coefficients and initial conditions from `seed` and solves.
/// Throws NumericalError when the solve is rejected.
TrajectorySample generate_sample(const TaskSpec& task, std::uint64_t seed);

}  // namespace neurop::pde

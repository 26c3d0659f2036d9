#include "neurop/pde/tasks.hpp"

#include <algorithm>
#include <array>

#include "neurop/core/error.hpp"
#include "neurop/pde/solvers.hpp"

namespace neurop::pde {

namespace {

constexpr std::array<std::pair<TaskKind, const char*>, 6> kKinds{{
    {TaskKind::advection, "advection"},
    {TaskKind::heat, "heat"},
    {TaskKind::heat_convection, "heat_convection"},
    {TaskKind::burgers, "burgers"},
    {TaskKind::gray_scott, "gray_scott"},
    {TaskKind::rd_advection, "rd_advection"},
}};

bool has_velocity(TaskKind k) {
  return k == TaskKind::advection || k == TaskKind::heat_convection || k == TaskKind::rd_advection;
}
bool two_species(TaskKind k) { return k == TaskKind::gray_scott || k == TaskKind::rd_advection; }

void check_range(const Range& r, const std::string& name, double floor, bool strict) {
  if (r.hi < r.lo) throw ValueError(name + " range has hi < lo");
  if (strict ? !(r.lo > floor) : !(r.lo >= floor)) throw ValueError(name + " range lies outside the valid domain");
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const nlohmann::json::exception&) {
    throw ValueError(std::string("field '") + key + "' has the wrong type");
  }
}

void read_range(const nlohmann::json& j, const char* key, Range& r) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_number()) {
    r.lo = r.hi = v.get<double>();
  } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    r.lo = v[0].get<double>();
    r.hi = v[1].get<double>();
  } else {
    throw ValueError(std::string("field '") + key + "' must be a number or a [lo, hi] pair");
  }
}

/// Rescale to [0, 1].
Tensor unit_range(Tensor g) {
  const double lo = min_value(g), hi = max_value(g);
  for (double& x : g.data()) x = hi > lo ? (x - lo) / (hi - lo) : 0.0;
  return g;
}

}  // namespace

std::string to_string(TaskKind kind) {
  for (auto [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

TaskKind task_kind_from_string(const std::string& name) {
  for (auto [k, n] : kKinds) {
    if (name == n) return k;
  }
  throw ValueError("unknown task kind '" + name + "'");
}

std::vector<std::string> TaskSpec::input_names() const {
  std::vector<std::string> names{"u0"};
  if (two_species(kind)) {
    names.insert(names.end(), {"v0", "F", "k"});
  } else if (kind != TaskKind::advection) {
    names.push_back("nu");
  }
  if (has_velocity(kind)) {
    const char* axes[] = {"c_x", "c_y"};
    for (std::size_t d = 0; d < grid.dims(); ++d) names.push_back(axes[d]);
  }
  return names;
}

std::vector<std::string> TaskSpec::output_names() const {
  if (two_species(kind)) return {"u", "v"};
  return {"u"};
}

std::size_t TaskSpec::frames() const {
  if (!rollout || grid.save_stride == 0) return 1;
  return (grid.steps + grid.save_stride - 1) / grid.save_stride;
}

std::size_t TaskSpec::n_out() const { return frames() * output_names().size(); }

void TaskSpec::validate() const {
  if (id.empty()) throw ValueError("task id must not be empty");
  try {
    grid.validate();
  } catch (const ValueError& e) {
    throw ValueError("task '" + id + "': " + e.what());
  }
  if (kind == TaskKind::burgers && grid.dims() != 1) throw ValueError("task '" + id + "': Burgers is 1-D only");
  if (!(length_scale > 0.0)) throw ValueError("task '" + id + "': length_scale must be positive");
  if (!(amplitude > 0.0)) throw ValueError("task '" + id + "': amplitude must be positive");
  if (rollout && grid.save_stride == 0) throw ValueError("task '" + id + "': rollout needs a save stride");
  const std::string p = "task '" + id + "': ";
  switch (kind) {
    case TaskKind::heat:
    case TaskKind::heat_convection:
    case TaskKind::burgers:
      check_range(nu, p + "nu", 0.0, true);
      break;
    case TaskKind::gray_scott:
    case TaskKind::rd_advection:
      check_range(feed, p + "feed", 0.0, false);
      check_range(kill, p + "kill", 0.0, false);
      if (!(du > 0.0) || !(dv > 0.0)) throw ValueError(p + "du and dv must be positive");
      if (grid.dt * (1.0 + feed.hi + kill.hi) > 2.0) throw ValueError(p + "dt too large for the reaction step");
      break;
    case TaskKind::advection:
      break;
  }
  if (has_velocity(kind) && velocity.hi < velocity.lo) throw ValueError(p + "velocity range has hi < lo");
}

void to_json(nlohmann::json& j, const TaskSpec& t) {
  j = nlohmann::json{
      {"id", t.id},
      {"kind", to_string(t.kind)},
      {"grid",
       {{"points", t.grid.points},
        {"lengths", t.grid.lengths},
        {"dt", t.grid.dt},
        {"steps", t.grid.steps},
        {"save_stride", t.grid.save_stride}}},
      {"length_scale", t.length_scale},
      {"amplitude", t.amplitude},
      {"rollout", t.rollout},
  };
  auto range = [](const Range& r) { return nlohmann::json::array({r.lo, r.hi}); };
  if (!two_species(t.kind) && t.kind != TaskKind::advection) j["nu"] = range(t.nu);
  if (has_velocity(t.kind)) j["velocity"] = range(t.velocity);
  if (two_species(t.kind)) {
    j["feed"] = range(t.feed);
    j["kill"] = range(t.kill);
    j["du"] = t.du;
    j["dv"] = t.dv;
  }
}

void from_json(const nlohmann::json& j, TaskSpec& t) {
  if (!j.is_object()) throw ValueError("task entry must be a mapping");
  if (!j.contains("id")) throw ValueError("task is missing field 'id'");
  if (!j.contains("kind")) throw ValueError("task is missing field 'kind'");
  read(j, "id", t.id);
  std::string kind;
  read(j, "kind", kind);
  t.kind = task_kind_from_string(kind);
  if (!j.contains("grid")) throw ValueError("task '" + t.id + "' is missing field 'grid'");
  const auto& g = j.at("grid");
  read(g, "points", t.grid.points);
  read(g, "lengths", t.grid.lengths);
  if (t.grid.lengths.empty()) t.grid.lengths.assign(t.grid.points.size(), 1.0);
  read(g, "dt", t.grid.dt);
  read(g, "steps", t.grid.steps);
  read(g, "save_stride", t.grid.save_stride);
  read(j, "length_scale", t.length_scale);
  read(j, "amplitude", t.amplitude);
  read(j, "rollout", t.rollout);
  read_range(j, "nu", t.nu);
  read_range(j, "velocity", t.velocity);
  read_range(j, "feed", t.feed);
  read_range(j, "kill", t.kill);
  read(j, "du", t.du);
  read(j, "dv", t.dv);
}

TrajectorySample generate_sample(const TaskSpec& task, std::uint64_t seed) {
  task.validate();
  const GridSpec& g = task.grid;
  Rng rng(seed);
  TrajectorySample s;
  s.task = task.id;
  s.seed = seed;

  const Tensor field = random_field(g, task.length_scale, task.amplitude, derive_seed(seed, 1));
  std::vector<Tensor> in_fields;
  Trajectory traj;
  auto draw_velocity = [&] {
    std::vector<double> c(g.dims());
    for (double& x : c) x = task.velocity.sample(rng);
    return c;
  };

  switch (task.kind) {
    case TaskKind::advection: {
      const auto c = draw_velocity();
      s.coefficients = c;
      traj = solve_advection(field, c, g);
      break;
    }
    case TaskKind::heat:
    case TaskKind::burgers: {
      const double nu = task.nu.sample(rng);
      s.coefficients = {nu};
      traj = task.kind == TaskKind::heat ? solve_heat(field, nu, g) : solve_burgers(field, nu, g);
      break;
    }
    case TaskKind::heat_convection: {
      const double nu = task.nu.sample(rng);
      const auto c = draw_velocity();
      s.coefficients = {nu};
      s.coefficients.insert(s.coefficients.end(), c.begin(), c.end());
      traj = solve_heat_convection(field, nu, c, g);
      break;
    }
    case TaskKind::gray_scott:
    case TaskKind::rd_advection: {
      GrayScottParams p{task.du, task.dv, task.feed.sample(rng), task.kill.sample(rng)};
      s.coefficients = {p.feed, p.kill};
      const Tensor shape = unit_range(field);
      Tensor u0(g.points), v0(g.points);
      for (std::size_t i = 0; i < shape.size(); ++i) {
        u0[i] = 1.0 - 0.5 * shape[i];
        v0[i] = 0.25 * shape[i];
      }
      in_fields.push_back(std::move(u0));
      in_fields.push_back(std::move(v0));
      if (task.kind == TaskKind::rd_advection) {
        const auto c = draw_velocity();
        s.coefficients.insert(s.coefficients.end(), c.begin(), c.end());
        traj = solve_rd_advection(in_fields[0], in_fields[1], p, c, g);
      } else {
        traj = solve_gray_scott(in_fields[0], in_fields[1], p, g);
      }
      break;
    }
  }
  if (in_fields.empty()) in_fields.push_back(field);

  const std::size_t npts = numel(g.points);
  Shape in_shape{task.n_in()};
  in_shape.insert(in_shape.end(), g.points.begin(), g.points.end());
  std::vector<double> in;
  in.reserve(numel(in_shape));
  for (const Tensor& f : in_fields) in.insert(in.end(), f.data().begin(), f.data().end());
  for (double c : s.coefficients) in.insert(in.end(), npts, c);
  s.inputs = Tensor(in_shape, std::move(in));

  Shape out_shape{task.n_out()};
  out_shape.insert(out_shape.end(), g.points.begin(), g.points.end());
  std::vector<double> out;
  out.reserve(numel(out_shape));
  if (task.rollout) {
    for (std::size_t f = 1; f < traj.frames.size(); ++f) {
      out.insert(out.end(), traj.frames[f].data().begin(), traj.frames[f].data().end());
    }
  } else {
    out.assign(traj.final().data().begin(), traj.final().data().end());
  }
  s.targets = Tensor(out_shape, std::move(out));
  if (!s.inputs.all_finite() || !s.targets.all_finite()) {
    throw NumericalError("task '" + task.id + "' produced non-finite values for seed " + std::to_string(seed));
  }
  return s;
}

}  // namespace neurop::pde

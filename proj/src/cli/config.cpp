#include "neurop/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace neurop::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::oos_params:
      return "oos_params";
    case Scenario::input_extension:
      return "input_extension";
    case Scenario::multiphysics:
      return "multiphysics";
  }
  return "unknown";
}

Scenario scenario_from_string(const std::string& name) {
  for (auto s : {Scenario::oos_params, Scenario::input_extension, Scenario::multiphysics}) {
    if (to_string(s) == name) return s;
  }
  throw ValueError("unknown scenario '" + name + "' (expected oos_params, input_extension or multiphysics)");
}

namespace {

json scalar(const YAML::Node& n) {
  const std::string& s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted
  if (s == "true" || s == "false") return s == "true";
  if (s == "null" || s == "~" || s.empty()) return nullptr;
  if (std::regex_match(s, std::regex(R"([-+]?[0-9]+)"))) {
    if (s[0] == '-') return std::stoll(s);
    return std::stoull(s);
  }
  if (std::regex_match(s, std::regex(R"([-+]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][-+]?[0-9]+)?)"))) return std::stod(s);
  return s;
}

json to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Scalar:
      return scalar(n);
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& e : n) a.push_back(to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = to_json(kv.second);
      return o;
    }
    default:
      return nullptr;
  }
}

/// Line of the key a message names ("field 'nu'"), else of the node itself.
int line_for(const YAML::Node& node, const std::string& message) {
  std::smatch m;
  if (node.IsMap() && std::regex_search(message, m, std::regex(R"('([A-Za-z_0-9]+)')"))) {
    const std::string key = m[1];
    for (const auto& kv : node) {
      if (kv.first.as<std::string>() == key) return kv.first.Mark().line + 1;
      if (kv.second.IsMap()) {
        for (const auto& inner : kv.second) {
          if (inner.first.as<std::string>() == key) return inner.first.Mark().line + 1;
        }
      }
    }
  }
  return node.Mark().line + 1;
}

class Reader {
 public:
  explicit Reader(fs::path source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& node, const std::string& field, const std::string& message) const {
    std::ostringstream os;
    os << source_.string() << ":" << line_for(node, message) << ": " << field << ": " << message;
    throw ConfigError(os.str());
  }

  template <typename Fn>
  void guarded(const YAML::Node& node, const std::string& field, Fn&& fn) const {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(node, field, e.what());
    } catch (const json::exception& e) {
      fail(node, field, std::string("wrong type: ") + e.what());
    }
  }

  void only_keys(const YAML::Node& node, const std::string& field, const std::set<std::string>& allowed) const {
    if (!node.IsMap()) fail(node, field, "expected a mapping");
    for (const auto& kv : node) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) {
        std::ostringstream os;
        os << source_.string() << ":" << kv.first.Mark().line + 1 << ": " << field << ": unknown field '" << key
           << "'";
        throw ConfigError(os.str());
      }
    }
  }

 private:
  fs::path source_;
};

const std::set<std::string> kTrainKeys = {"epochs", "learning_rate", "batch_size",  "clip_norm",   "beta1",
                                          "beta2",  "adam_epsilon",  "decay_every", "decay_factor"};

void read_train(const Reader& r, const YAML::Node& node, const std::string& field, train::TrainConfig& c,
                const std::set<std::string>& extra_keys) {
  std::set<std::string> keys = kTrainKeys;
  keys.insert(extra_keys.begin(), extra_keys.end());
  r.only_keys(node, field, keys);
  json j = to_json(node);
  for (const auto& k : extra_keys) j.erase(k);
  r.guarded(node, field, [&] { train::from_json(j, c); });
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

}  // namespace

const pde::TaskSpec& ExperimentConfig::task(const std::string& id) const {
  for (const auto& t : tasks) {
    if (t.id == id) return t;
  }
  throw ConfigError(source.string() + ": task '" + id + "' is not defined under 'tasks'");
}

void ExperimentConfig::validate() const {
  const std::string where = source.string() + ": ";
  if (pretrain_tasks.empty()) throw ConfigError(where + "pretrain.tasks: at least one task is required");
  if (finetune_task.empty()) throw ConfigError(where + "finetune.task: missing");
  std::set<std::string> ids;
  for (const auto& t : tasks) {
    if (!ids.insert(t.id).second) throw ConfigError(where + "tasks: duplicate id '" + t.id + "'");
  }
  std::set<std::string> seen;
  for (const auto& id : pretrain_tasks) {
    task(id);
    if (!seen.insert(id).second) throw ConfigError(where + "pretrain.tasks: '" + id + "' listed twice");
  }
  const auto& ft = task(finetune_task);
  if (seen.count(finetune_task)) {
    throw ConfigError(where + "finetune.task: '" + finetune_task + "' is also a pretraining task");
  }
  for (const auto& id : pretrain_tasks) {
    if (task(id).grid.dims() != ft.grid.dims()) {
      throw ConfigError(where + "tasks: '" + id + "' and '" + finetune_task +
                        "' differ in dimensionality; one core serves one dimensionality");
    }
    if (task(id).grid.dims() != core.dims()) {
      throw ConfigError(where + "core.modes: core is " + std::to_string(core.dims()) + "-D but task '" + id + "' is " +
                        std::to_string(task(id).grid.dims()) + "-D");
    }
  }
  if (adapter_init == AdapterInit::inherit && !seen.count(inherit_from)) {
    throw ConfigError(where + "finetune.inherit_from: '" + inherit_from + "' is not a pretraining task");
  }
  if (data.train == 0 || data.validation == 0) throw ConfigError(where + "data: split sizes must be positive");

  switch (scenario) {
    case Scenario::oos_params:
      for (const auto& id : pretrain_tasks) {
        const auto& p = task(id);
        if (p.kind != ft.kind || p.input_names() != ft.input_names()) {
          throw ConfigError(where + "scenario: oos_params needs '" + id + "' and '" + finetune_task +
                            "' to share the equation and inputs");
        }
      }
      break;
    case Scenario::input_extension:
      for (const auto& id : pretrain_tasks) {
        if (ft.n_in() <= task(id).n_in()) {
          throw ConfigError(where + "scenario: input_extension needs finetune task '" + finetune_task + "' (n_in=" +
                            std::to_string(ft.n_in()) + ") to have more inputs than '" + id + "' (n_in=" +
                            std::to_string(task(id).n_in()) + ")");
        }
      }
      break;
    case Scenario::multiphysics: {
      std::set<pde::TaskKind> kinds;
      for (const auto& id : pretrain_tasks) kinds.insert(task(id).kind);
      if (kinds.size() < 2) throw ConfigError(where + "scenario: multiphysics needs at least two pretraining equations");
      if (kinds.count(ft.kind)) {
        throw ConfigError(where + "scenario: multiphysics fine-tunes on an equation absent from pretraining");
      }
      break;
    }
  }
}

fs::path ExperimentConfig::dataset_path(const std::string& task_id, const std::string& split) const {
  return data_dir / (task_id + "." + split + ".nopd");
}

fs::path ExperimentConfig::phase_dir(transfer::Phase phase) const { return output / transfer::to_string(phase); }

ExperimentConfig parse_config(const std::string& text, const fs::path& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source.string() + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  Reader r(source);
  if (!root.IsMap()) throw ConfigError(source.string() + ":1: top level must be a mapping");
  r.only_keys(root, "config",
              {"experiment", "scenario", "seed", "output", "data_dir", "core", "data", "tasks", "pretrain",
               "finetune", "scratch"});
  for (const char* key : {"experiment", "scenario", "core", "tasks", "pretrain", "finetune"}) {
    if (!root[key]) r.fail(root, key, "missing required field");
  }

  ExperimentConfig c;
  c.source = source;
  const fs::path base = source.has_parent_path() ? source.parent_path() : fs::path(".");
  r.guarded(root["experiment"], "experiment", [&] { c.name = root["experiment"].as<std::string>(); });
  r.guarded(root["scenario"], "scenario", [&] { c.scenario = scenario_from_string(root["scenario"].as<std::string>()); });
  if (root["seed"]) r.guarded(root["seed"], "seed", [&] { c.seed = root["seed"].as<std::uint64_t>(); });
  c.output = resolve(base, root["output"] ? root["output"].as<std::string>() : "runs/" + c.name);
  c.data_dir = root["data_dir"] ? resolve(base, root["data_dir"].as<std::string>()) : c.output / "data";

  const auto core = root["core"];
  r.only_keys(core, "core",
              {"architecture", "width", "layers", "modes", "ssm_kernel", "scan_axis", "latents", "self_attention_layers",
               "heads"});
  r.guarded(core, "core", [&] {
    transfer::from_json(to_json(core), c.core);
    c.core.validate();
  });

  if (const auto data = root["data"]) {
    r.only_keys(data, "data", {"train", "validation", "seed"});
    r.guarded(data, "data", [&] {
      if (data["train"]) c.data.train = data["train"].as<std::size_t>();
      if (data["validation"]) c.data.validation = data["validation"].as<std::size_t>();
      if (data["seed"]) c.data.seed = data["seed"].as<std::uint64_t>();
    });
  }

  const auto tasks = root["tasks"];
  if (!tasks.IsSequence()) r.fail(tasks, "tasks", "expected a list of task entries");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto node = tasks[i];
    const std::string field = "tasks[" + std::to_string(i) + "]";
    r.only_keys(node, field,
                {"id", "kind", "grid", "length_scale", "amplitude", "rollout", "nu", "velocity", "feed", "kill", "du",
                 "dv"});
    pde::TaskSpec t;
    r.guarded(node, field, [&] {
      pde::from_json(to_json(node), t);
      t.validate();
    });
    c.tasks.push_back(std::move(t));
  }

  const auto pre = root["pretrain"];
  read_train(r, pre, "pretrain", c.pretrain, {"tasks"});
  if (!pre["tasks"]) r.fail(pre, "pretrain.tasks", "missing required field");
  r.guarded(pre["tasks"], "pretrain.tasks", [&] { c.pretrain_tasks = pre["tasks"].as<std::vector<std::string>>(); });

  const auto ft = root["finetune"];
  c.finetune = c.pretrain;
  read_train(r, ft, "finetune", c.finetune, {"task", "adapter_init", "inherit_from"});
  if (!ft["task"]) r.fail(ft, "finetune.task", "missing required field");
  c.finetune_task = ft["task"].as<std::string>();
  if (ft["adapter_init"]) {
    const auto init = ft["adapter_init"].as<std::string>();
    if (init == "fresh") c.adapter_init = AdapterInit::fresh;
    else if (init == "inherit") c.adapter_init = AdapterInit::inherit;
    else r.fail(ft["adapter_init"], "finetune.adapter_init", "expected 'fresh' or 'inherit', got '" + init + "'");
  }
  if (c.adapter_init == AdapterInit::inherit) {
    c.inherit_from = ft["inherit_from"] ? ft["inherit_from"].as<std::string>() : c.pretrain_tasks.front();
  }

  c.scratch = c.finetune;
  if (const auto sc = root["scratch"]) read_train(r, sc, "scratch", c.scratch, {});

  c.pretrain.phase = {transfer::Phase::pretrain, c.pretrain_tasks};
  c.finetune.phase = {transfer::Phase::finetune, {c.finetune_task}};
  c.scratch.phase = {transfer::Phase::scratch, {c.finetune_task}};
  for (auto* t : {&c.pretrain, &c.finetune, &c.scratch}) {
    try {
      t->validate();
    } catch (const Error& e) {
      throw ConfigError(source.string() + ": " + transfer::to_string(t->phase.phase) + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), path);
}

}  // namespace neurop::cli

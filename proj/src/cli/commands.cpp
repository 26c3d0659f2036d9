#include "neurop/cli/commands.hpp"

#include <fstream>
#include <numeric>
#include <ostream>

#include "neurop/core/random.hpp"
#include "neurop/pde/dataset.hpp"
#include "neurop/transfer/checkpoint.hpp"
#include "neurop/transfer/metrics.hpp"

namespace neurop::cli {

namespace fs = std::filesystem;
using transfer::Phase;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed streams.
constexpr std::uint64_t kCoreStream = 1, kAdapterStream = 2, kTrainStream = 3;

std::uint64_t phase_index(Phase p) { return static_cast<std::uint64_t>(p); }

std::vector<std::string> referenced_tasks(const ExperimentConfig& c) {
  auto ids = c.pretrain_tasks;
  ids.push_back(c.finetune_task);
  return ids;
}

struct Splits {
  pde::Dataset train, validation;
};

pde::Dataset load_split(const ExperimentConfig& c, const std::string& task, const std::string& split) {
  const fs::path path = c.dataset_path(task, split);
  if (!fs::exists(path)) {
    throw MissingArtifact("dataset '" + path.string() + "' not found; run gen-data first");
  }
  pde::Dataset d;
  try {
    d = pde::read_dataset(path);
  } catch (const FormatError& e) {
    throw DataError(e.what());
  }
  if (nlohmann::json(d.manifest.task) != nlohmann::json(c.task(task))) {
    throw MissingArtifact("dataset '" + path.string() + "' was generated for a different task definition; rerun gen-data");
  }
  if (d.size() == 0) throw DataError("dataset '" + path.string() + "' is empty");
  return d;
}

Splits load_splits(const ExperimentConfig& c, const std::string& task) {
  return {load_split(c, task, "train"), load_split(c, task, "validation")};
}

std::vector<train::TaskData> task_data(const std::vector<std::string>& ids, const std::vector<Splits>& splits) {
  std::vector<train::TaskData> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({ids[i], &splits[i].train, &splits[i].validation});
  return out;
}

std::uint64_t adapter_seed(const ExperimentConfig& c, const std::string& task) {
  return derive_seed(c.seed, kAdapterStream, fnv1a(task));
}

train::TrainConfig seeded(const ExperimentConfig& c, train::TrainConfig t) {
  t.seed = derive_seed(c.seed, kTrainStream, phase_index(t.phase.phase));
  return t;
}

PhaseResult run_phase(const ExperimentConfig& c, transfer::Model& model, const train::TrainConfig& config,
                      const std::vector<Splits>& splits, std::ostream& log) {
  const Phase phase = config.phase.phase;
  log << transfer::to_string(phase) << ": " << transfer::trainable_count(config.phase, model) << " of "
      << model.parameter_count() << " parameters trainable, " << config.epochs << " epochs\n";
  PhaseResult out;
  out.checkpoint = c.checkpoint_path(phase);
  out.metrics = c.metrics_path(phase);
  fs::create_directories(c.phase_dir(phase));
  try {
    out.result = train::train(model, task_data(config.phase.tasks, splits), config);
  } catch (const train::TrainingDiverged& e) {
    e.log().write_csv(out.metrics);
    log << "diverged after epoch " << e.last_good_epoch() << "; log written to " << out.metrics.string() << "\n";
    throw;
  }
  const auto& log_records = out.result.log.records();
  for (const auto& r : log_records) {
    log << "  epoch " << r.epoch << "  loss " << format_mse(r.train_loss) << "  val nmae "
        << format_nmae_percent(r.val_nmae) << "%  " << format_seconds(r.seconds) << "s\n";
  }
  nlohmann::json entry = {{"phase", transfer::to_string(phase)},
                          {"tasks", config.phase.tasks},
                          {"train", config},
                          {"epochs", log_records.size()},
                          {"best_epoch", out.result.best_epoch},
                          {"mean_epoch_seconds", out.result.log.mean_epoch_seconds()},
                          {"trainable_params", transfer::trainable_count(config.phase, model)}};
  model.history().push_back(entry);
  out.result.best.history() = model.history();
  transfer::save_checkpoint(out.result.best, out.checkpoint);
  transfer::save_checkpoint(model, c.phase_dir(phase) / "final.nock");
  out.result.log.write_csv(out.metrics);
  log << "best epoch " << out.result.best_epoch << " -> " << out.checkpoint.string() << "\n";
  return out;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return exit_config;
  if (dynamic_cast<const MissingArtifact*>(&e)) return exit_missing;
  if (dynamic_cast<const DataError*>(&e) || dynamic_cast<const FormatError*>(&e)) return exit_data;
  if (dynamic_cast<const NumericalError*>(&e)) return exit_diverged;
  if (dynamic_cast<const ValueError*>(&e) || dynamic_cast<const ShapeError*>(&e)) return exit_config;
  return exit_failure;
}

void apply_overrides(ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.out) {
    const bool default_data = c.data_dir == c.output / "data";
    c.output = *o.out;
    if (default_data) c.data_dir = c.output / "data";
  }
}

std::uint64_t dataset_seed(const ExperimentConfig& c, const std::string& task, const std::string& split) {
  return derive_seed(c.data.seed, fnv1a(task), split == "train" ? 0 : 1);
}

GenDataResult cmd_gen_data(const ExperimentConfig& c, std::ostream& log) {
  GenDataResult out;
  fs::create_directories(c.data_dir);
  for (const auto& id : referenced_tasks(c)) {
    const auto& task = c.task(id);
    for (const std::string split : {"train", "validation"}) {
      const fs::path path = c.dataset_path(id, split);
      const std::size_t count = split == "train" ? c.data.train : c.data.validation;
      const std::uint64_t seed = dataset_seed(c, id, split);
      if (fs::exists(path)) {
        try {
          const auto stored = pde::read_dataset(path);
          if (nlohmann::json(stored.manifest.task) == nlohmann::json(task) && stored.manifest.count == count &&
              stored.manifest.master_seed == seed) {
            log << path.string() << ": up to date\n";
            out.up_to_date.push_back(path);
            continue;
          }
        } catch (const FormatError&) {
          // Unreadable or corrupt: regenerate.
        }
      }
      const auto data = pde::make_dataset(task, count, seed);
      pde::write_dataset(data, path);
      log << path.string() << ": wrote " << count << " samples\n";
      out.written.push_back(path);
    }
  }
  return out;
}

PhaseResult cmd_pretrain(const ExperimentConfig& c, std::ostream& log) {
  std::vector<Splits> splits;
  for (const auto& id : c.pretrain_tasks) splits.push_back(load_splits(c, id));
  transfer::Model model(c.core, derive_seed(c.seed, kCoreStream));
  for (std::size_t i = 0; i < c.pretrain_tasks.size(); ++i) {
    const auto& id = c.pretrain_tasks[i];
    model.attach(transfer::PhysicsTask::from_spec(c.task(id)), adapter_seed(c, id), splits[i].train.manifest.stats);
  }
  return run_phase(c, model, seeded(c, c.pretrain), splits, log);
}

PhaseResult cmd_finetune(const ExperimentConfig& c, std::ostream& log, const std::optional<fs::path>& checkpoint) {
  const fs::path source = checkpoint.value_or(c.checkpoint_path(Phase::pretrain));
  if (!fs::exists(source)) {
    throw MissingArtifact("pretrained checkpoint '" + source.string() + "' not found; run pretrain first");
  }
  transfer::Model model;
  try {
    model = transfer::load_checkpoint(source);
  } catch (const FormatError& e) {
    throw DataError(e.what());
  }
  const auto& stored = model.core().config();
  if (stored.architecture != c.core.architecture) {
    throw ConfigError("checkpoint '" + source.string() + "' holds a " + transfer::to_string(stored.architecture) +
                      " core but the config asks for " + transfer::to_string(c.core.architecture));
  }
  if (nlohmann::json(stored) != nlohmann::json(c.core)) {
    throw ConfigError("checkpoint '" + source.string() + "' core " + nlohmann::json(stored).dump() +
                      " differs from the configured core " + nlohmann::json(c.core).dump());
  }
  std::vector<Splits> splits;
  splits.push_back(load_splits(c, c.finetune_task));
  model.attach(transfer::PhysicsTask::from_spec(c.task(c.finetune_task)), adapter_seed(c, c.finetune_task),
               splits[0].train.manifest.stats, true);
  if (c.adapter_init == AdapterInit::inherit) {
    transfer::inherit_adapter(model, c.finetune_task, c.inherit_from);
    log << "adapter for '" << c.finetune_task << "' inherits from '" << c.inherit_from << "'\n";
  }
  return run_phase(c, model, seeded(c, c.finetune), splits, log);
}

PhaseResult cmd_scratch(const ExperimentConfig& c, std::ostream& log) {
  std::vector<Splits> splits;
  splits.push_back(load_splits(c, c.finetune_task));
  transfer::Model model(c.core, derive_seed(c.seed, kCoreStream, 1));
  model.attach(transfer::PhysicsTask::from_spec(c.task(c.finetune_task)), adapter_seed(c, c.finetune_task),
               splits[0].train.manifest.stats);
  return run_phase(c, model, seeded(c, c.scratch), splits, log);
}

std::string display_name(transfer::Architecture a) {
  switch (a) {
    case transfer::Architecture::fno:
      return "FNO";
    case transfer::Architecture::mamba_fno:
      return "Mamba FNO";
    case transfer::Architecture::perceiver_no:
      return "Perc.";
  }
  return "?";
}

std::string model_label(transfer::Architecture a, Phase phase) {
  const char* tag = phase == Phase::finetune ? "pretr." : phase == Phase::scratch ? "scratch" : "pretrain";
  return display_name(a) + " (" + tag + ")";
}

MetricsRecord cmd_eval(const ExperimentConfig* c, const EvalRequest& req, std::ostream& log) {
  std::string task = req.task;
  if (task.empty()) {
    if (!c) throw ConfigError("eval needs --task or --config");
    task = c->finetune_task;
  }
  fs::path dataset_path;
  if (req.dataset) dataset_path = *req.dataset;
  else if (c) dataset_path = c->dataset_path(task, "validation");
  else throw ConfigError("eval needs --dataset or --config");
  if (!fs::exists(dataset_path)) throw MissingArtifact("dataset '" + dataset_path.string() + "' not found");
  pde::Dataset data;
  try {
    data = pde::read_dataset(dataset_path);
  } catch (const FormatError& e) {
    throw DataError(e.what());
  }
  if (data.size() == 0) throw DataError("dataset '" + dataset_path.string() + "' has no samples");

  MetricsRecord r;
  r.task = task;
  r.samples = data.size();
  if (req.oracle) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const Tensor t = data.target_batch(all);
    r.mse = transfer::mse(t, t);
    r.nmae = transfer::nmae(t, t);
    r.label = req.label.empty() ? "stored targets" : req.label;
    r.phase = "oracle";
  } else {
    fs::path ckpt;
    if (req.checkpoint) ckpt = *req.checkpoint;
    else if (c) ckpt = c->checkpoint_path(Phase::finetune);
    else throw ConfigError("eval needs --checkpoint");
    if (!fs::exists(ckpt)) throw MissingArtifact("checkpoint '" + ckpt.string() + "' not found");
    transfer::Model model;
    try {
      model = transfer::load_checkpoint(ckpt);
    } catch (const FormatError& e) {
      throw DataError(e.what());
    }
    if (!model.adapters().contains(task)) {
      throw ConfigError("checkpoint '" + ckpt.string() + "' has no adapter for task '" + task + "'");
    }
    const auto& adapter = model.adapters().at(task);
    if (data.manifest.task.input_names() != adapter.task.input_names ||
        data.manifest.task.output_names() != adapter.task.output_names) {
      throw ConfigError("dataset '" + dataset_path.string() + "' (task '" + data.manifest.task.id +
                        "') does not match the channels of task '" + task + "'");
    }
    const auto metrics = transfer::evaluate(transfer::compose(model, task), data);
    r.mse = metrics.mse;
    r.nmae = metrics.nmae;
    r.parameters = metrics.parameters;
    r.architecture = transfer::to_string(model.core().config().architecture);
    Phase phase = Phase::pretrain;
    const auto& history = model.history();
    if (!history.empty()) {
      const auto& last = history.back();
      phase = transfer::phase_from_string(last.value("phase", "pretrain"));
      r.epoch_seconds = last.value("mean_epoch_seconds", 0.0);
    }
    r.phase = transfer::to_string(phase);
    r.label = req.label.empty() ? model_label(model.core().config().architecture, phase) : req.label;
  }

  fs::path out;
  if (req.out) out = *req.out;
  else if (c) out = c->output / "eval" / (r.phase + "_" + task + ".json");
  else out = fs::path("eval") / (r.phase + "_" + task + ".json");
  write_record(r, out);
  log << r.label << ": mse " << format_mse(r.mse) << ", nmae " << format_nmae_percent(r.nmae) << "% -> "
      << out.string() << "\n";
  return r;
}

ReportTable cmd_report(const ReportRequest& req, std::ostream& log) {
  if (req.records.empty()) throw ConfigError("report needs at least one metrics record");
  ReportTable table;
  for (const auto& p : req.records) {
    if (!fs::exists(p)) throw MissingArtifact("metrics record '" + p.string() + "' not found");
    table.add(read_record(p));
  }
  if (req.sort) table.sort_by_nmae();
  log << table.to_text();
  if (req.out) {
    fs::create_directories(*req.out);
    std::ofstream(*req.out / "report.txt") << table.to_text();
    std::ofstream(*req.out / "report.csv") << table.to_csv();
  }
  return table;
}

}  // namespace neurop::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "neurop/core/error.hpp"
#include "neurop/pde/tasks.hpp"
#include "neurop/train/trainer.hpp"
#include "neurop/transfer/core.hpp"

namespace neurop::cli {

/// Invalid configuration. The message carries file, line and field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A required input produced by an earlier command is absent.
class MissingArtifact : public Error {
 public:
  using Error::Error;
};

enum class Scenario { oos_params, input_extension, multiphysics };

std::string to_string(Scenario s);
Scenario scenario_from_string(const std::string& name);

/// How the fine-tune adapter starts.
enum class AdapterInit { fresh, inherit };

struct DataSettings {
  std::size_t train = 256;
  std::size_t validation = 64;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  std::filesystem::path source;
  std::string name;
  Scenario scenario = Scenario::oos_params;
  std::uint64_t seed = 0;
  transfer::CoreConfig core;
  std::vector<pde::TaskSpec> tasks;
  DataSettings data;

  std::vector<std::string> pretrain_tasks;
  std::string finetune_task;
  train::TrainConfig pretrain;
  train::TrainConfig finetune;
  train::TrainConfig scratch;
  AdapterInit adapter_init = AdapterInit::fresh;
  std::string inherit_from;

  std::filesystem::path output;
  std::filesystem::path data_dir;

  const pde::TaskSpec& task(const std::string& id) const;
  /// Checks references and scenario compatibility; throws ConfigError.
  void validate() const;

  std::filesystem::path dataset_path(const std::string& task, const std::string& split) const;
  std::filesystem::path phase_dir(transfer::Phase phase) const;
  std::filesystem::path checkpoint_path(transfer::Phase phase) const { return phase_dir(phase) / "checkpoint.nock"; }
  std::filesystem::path metrics_path(transfer::Phase phase) const { return phase_dir(phase) / "metrics.csv"; }
};

/// Parses a YAML experiment file. Relative paths resolve against the
/// file's directory.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& source);

}  // namespace neurop::cli

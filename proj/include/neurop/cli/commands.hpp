#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "neurop/cli/config.hpp"
#include "neurop/cli/report.hpp"
#include "neurop/train/trainer.hpp"

namespace neurop::cli {

/// Malformed or unusable data (empty split, corrupt file).
class DataError : public Error {
 public:
  using Error::Error;
};

enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_missing = 3,
  exit_data = 4,
  exit_diverged = 5,
};

/// Maps an exception raised by a command onto the documented exit codes.
int exit_code_for(const std::exception& e);

/// Command-line overrides shared by every command.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

/// Applies --seed (training seed) and --out (output directory).
void apply_overrides(ExperimentConfig& config, const Overrides& o);

/// Master seed of one dataset split.
std::uint64_t dataset_seed(const ExperimentConfig& config, const std::string& task, const std::string& split);

struct GenDataResult {
  std::vector<std::filesystem::path> written;
  std::vector<std::filesystem::path> up_to_date;
};

/// Generates train and validation splits for every referenced task. Splits
/// whose stored manifest and checksum already match are left untouched.
GenDataResult cmd_gen_data(const ExperimentConfig& config, std::ostream& log);

struct PhaseResult {
  train::TrainResult result;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
};

PhaseResult cmd_pretrain(const ExperimentConfig& config, std::ostream& log);
/// `checkpoint` defaults to the pretraining checkpoint of the experiment.
PhaseResult cmd_finetune(const ExperimentConfig& config, std::ostream& log,
                         const std::optional<std::filesystem::path>& checkpoint = std::nullopt);
PhaseResult cmd_scratch(const ExperimentConfig& config, std::ostream& log);

struct EvalRequest {
  std::optional<std::filesystem::path> checkpoint;
  std::string task;
  std::optional<std::filesystem::path> dataset;
  std::string label;
  /// Evaluate the stored targets themselves instead of a model.
  bool oracle = false;
  std::optional<std::filesystem::path> out;
};

/// Evaluates on `dataset` (default: the task's validation split) and writes
/// the record to `out` (default: <output>/eval/<label>.json).
MetricsRecord cmd_eval(const ExperimentConfig* config, const EvalRequest& request, std::ostream& log);

struct ReportRequest {
  std::vector<std::filesystem::path> records;
  bool sort = false;
  /// Writes report.txt and report.csv here when set.
  std::optional<std::filesystem::path> out;
};

ReportTable cmd_report(const ReportRequest& request, std::ostream& log);

/// "FNO", "Mamba FNO", "Perc."
std::string display_name(transfer::Architecture a);
/// "FNO (pretr.)", "Mamba FNO (scratch)", ...
std::string model_label(transfer::Architecture a, transfer::Phase phase);

}  // namespace neurop::cli

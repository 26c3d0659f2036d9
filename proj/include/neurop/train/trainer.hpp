#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "neurop/core/error.hpp"
#include "neurop/pde/dataset.hpp"
#include "neurop/train/optimizer.hpp"
#include "neurop/transfer/model.hpp"

namespace neurop::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  double clip_norm = 1.0;
  AdamSettings adam;
  /// Multiply the learning rate by decay_factor every decay_every epochs
  /// (0 disables).
  std::size_t decay_every = 0;
  double decay_factor = 1.0;
  transfer::TrainPhase phase;

  double learning_rate_at(std::size_t epoch) const;
  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Reads the optimization fields; the phase is left untouched.
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Mean squared error over all elements; differentiable in `pred`.
Var loss_mse(const Var& pred, const Tensor& target);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  double val_nmae = 0.0;
  double seconds = 0.0;
  std::size_t trainable_params = 0;
};

class MetricsLog {
 public:
  static constexpr const char* header = "epoch,train_loss,val_mse,val_nmae_percent,seconds,trainable_params";

  void append(const EpochRecord& r) { records_.push_back(r); }
  const std::vector<EpochRecord>& records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }
  double mean_epoch_seconds() const;

  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<EpochRecord> records_;
};

/// Training and validation data of one task.
struct TaskData {
  std::string task;
  const pde::Dataset* train = nullptr;
  const pde::Dataset* validation = nullptr;
};

struct TrainResult {
  MetricsLog log;
  transfer::Model best;
  std::size_t best_epoch = 0;
};

/// Raised when the training loss stops being finite. Carries the log up to
/// the last good epoch.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, MetricsLog log, std::size_t last_good_epoch)
      : NumericalError(what), log_(std::move(log)), last_good_epoch_(last_good_epoch) {}
  const MetricsLog& log() const noexcept { return log_; }
  std::size_t last_good_epoch() const noexcept { return last_good_epoch_; }

 private:
  MetricsLog log_;
  std::size_t last_good_epoch_;
};

/// Seeded mini-batch training of `model` under config.phase. With several
/// tasks the batches are interleaved round-robin, one batch per task in turn.
/// Validation metrics are averaged over tasks; the model with the lowest
/// validation NMAE is kept in the result. Frozen core parameters are hashed
/// after every epoch and any change aborts the run.
TrainResult train(transfer::Model& model, const std::vector<TaskData>& data, const TrainConfig& config);

}  // namespace neurop::train

#include "neurop/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "neurop/core/ops.hpp"
#include "neurop/transfer/metrics.hpp"

namespace neurop::train {

using transfer::Phase;

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  if (decay_every == 0) return learning_rate;
  return learning_rate * std::pow(decay_factor, static_cast<double>(epoch / decay_every));
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValueError("learning rate must be positive");
  if (batch_size == 0) throw ValueError("batch size must be at least 1");
  if (epochs == 0) throw ValueError("epoch count must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ValueError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ValueError("Adam epsilon must be positive");
  if (decay_every > 0 && !(decay_factor > 0.0)) throw ValueError("decay factor must be positive");
  phase.validate();
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"epochs", c.epochs},
                     {"seed", c.seed},
                     {"clip_norm", c.clip_norm},
                     {"beta1", c.adam.beta1},
                     {"beta2", c.adam.beta2},
                     {"adam_epsilon", c.adam.epsilon},
                     {"decay_every", c.decay_every},
                     {"decay_factor", c.decay_factor},
                     {"phase", transfer::to_string(c.phase.phase)},
                     {"tasks", c.phase.tasks}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto field = [&](const char* key, auto& out) {
    if (!j.contains(key)) return;
    try {
      j.at(key).get_to(out);
    } catch (const nlohmann::json::exception&) {
      throw ValueError(std::string("field '") + key + "' has the wrong type");
    }
  };
  field("learning_rate", c.learning_rate);
  field("batch_size", c.batch_size);
  field("epochs", c.epochs);
  field("seed", c.seed);
  field("clip_norm", c.clip_norm);
  field("beta1", c.adam.beta1);
  field("beta2", c.adam.beta2);
  field("adam_epsilon", c.adam.epsilon);
  field("decay_every", c.decay_every);
  field("decay_factor", c.decay_factor);
}

Var loss_mse(const Var& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("loss: prediction " + to_string(pred.shape()) + " vs target " + to_string(target.shape()));
  }
  Var diff = sub(pred, pred.tape().constant(target));
  return mean(mul(diff, diff));
}

double MetricsLog::mean_epoch_seconds() const {
  if (records_.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : records_) s += r.seconds;
  return s / static_cast<double>(records_.size());
}

std::string MetricsLog::to_csv() const {
  std::ostringstream out;
  out << header << '\n' << std::setprecision(17);
  for (const auto& r : records_) {
    out << r.epoch << ',' << r.train_loss << ',' << r.val_mse << ',' << 100.0 * r.val_nmae << ',' << r.seconds << ','
        << r.trainable_params << '\n';
  }
  return out.str();
}

void MetricsLog::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << to_csv();
}

namespace {

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

struct Batch {
  std::size_t task;
  std::vector<std::size_t> indices;
};

/// Round-robin batch schedule for one epoch.
std::vector<Batch> schedule(const std::vector<TaskData>& data, const TrainConfig& config, std::size_t epoch) {
  std::vector<std::vector<Batch>> per_task(data.size());
  std::size_t rounds = 0;
  for (std::size_t t = 0; t < data.size(); ++t) {
    std::vector<std::size_t> idx(data[t].train->size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(config.seed, epoch, t));
    shuffle(idx, rng);
    for (std::size_t start = 0; start < idx.size(); start += config.batch_size) {
      const std::size_t end = std::min(idx.size(), start + config.batch_size);
      per_task[t].push_back(Batch{t, std::vector<std::size_t>(idx.begin() + start, idx.begin() + end)});
    }
    rounds = std::max(rounds, per_task[t].size());
  }
  std::vector<Batch> out;
  for (std::size_t r = 0; r < rounds; ++r) {
    for (auto& batches : per_task) {
      if (r < batches.size()) out.push_back(std::move(batches[r]));
    }
  }
  return out;
}

}  // namespace

TrainResult train(transfer::Model& model, const std::vector<TaskData>& data, const TrainConfig& config) {
  config.validate();
  if (data.size() != config.phase.tasks.size()) throw ValueError("training data must cover exactly the phase's tasks");
  for (std::size_t t = 0; t < data.size(); ++t) {
    const TaskData& d = data[t];
    if (d.task != config.phase.tasks[t]) throw ValueError("training data order must follow the phase's task list");
    if (!d.train || d.train->size() == 0) throw ValueError("task '" + d.task + "' has an empty training split");
    if (!d.validation || d.validation->size() == 0) throw ValueError("task '" + d.task + "' has an empty validation split");
    (void)transfer::compose(model, d.task);
  }

  const bool frozen_core = config.phase.phase == Phase::finetune;
  const std::uint64_t core_hash = transfer::parameter_hash(model.core());
  const std::size_t trainable = transfer::trainable_count(config.phase, model);
  const auto predicate = [&](const std::string& name) { return config.phase.selects(name); };

  const std::vector<blocks::Parameter*> selected = transfer::trainable_parameters(config.phase, model);
  OptimizerState state;
  state.settings = config.adam;
  TrainResult result;
  result.best = model;
  double best_nmae = std::numeric_limits<double>::infinity();
  std::size_t last_good = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = config.learning_rate_at(epoch - 1);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (const Batch& batch : schedule(data, config, epoch)) {
      const TaskData& d = data[batch.task];
      const transfer::ComposedModel g = transfer::compose(model, d.task);
      Tape tape;
      blocks::ForwardContext ctx(tape, predicate);
      Var loss = loss_mse(g.forward(ctx, d.train->input_batch(batch.indices)), d.train->target_batch(batch.indices));
      const double value = loss.value().item();
      if (!std::isfinite(value)) {
        throw TrainingDiverged("training loss became non-finite in epoch " + std::to_string(epoch) + " on task '" +
                                   d.task + "'; last good epoch " + std::to_string(last_good),
                               result.log, last_good);
      }
      tape.backward(loss);
      std::vector<blocks::Parameter*> params;
      std::vector<Tensor> grads;
      for (blocks::Parameter* p : selected) {
        if (!ctx.is_bound(*p)) continue;
        params.push_back(p);
        grads.push_back(ctx.gradient(*p));
      }
      clip_global_norm(grads, config.clip_norm);
      adam_step(state, params, grads, lr);
      loss_sum += value;
      ++loss_count;
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (frozen_core && transfer::parameter_hash(model.core()) != core_hash) {
      throw Error("frozen core parameters changed during fine-tuning (epoch " + std::to_string(epoch) + ")");
    }

    EpochRecord r;
    r.epoch = epoch;
    r.train_loss = loss_sum / static_cast<double>(loss_count);
    r.seconds = seconds;
    r.trainable_params = trainable;
    for (const TaskData& d : data) {
      const auto m = transfer::evaluate(transfer::compose(model, d.task), *d.validation);
      r.val_mse += m.mse / static_cast<double>(data.size());
      r.val_nmae += m.nmae / static_cast<double>(data.size());
    }
    result.log.append(r);
    last_good = epoch;
    if (r.val_nmae < best_nmae) {
      best_nmae = r.val_nmae;
      result.best = model;
      result.best_epoch = epoch;
    }
  }
  return result;
}

}  // namespace neurop::train

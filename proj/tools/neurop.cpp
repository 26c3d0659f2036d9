#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "neurop/cli/commands.hpp"

using namespace neurop::cli;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  auto* opt = cmd->add_option("--config", c.config, "Experiment YAML; relative paths inside resolve against its directory");
  if (config_required) opt->required();
  cmd->add_option("--seed", c.seed, "Seed override (data seed for gen-data, training seed otherwise)");
  cmd->add_option("--out", c.out, "Output directory override");
}

std::optional<ExperimentConfig> load(const Common& c, bool data_seed) {
  if (c.config.empty()) return std::nullopt;
  ExperimentConfig config = load_config(c.config);
  Overrides o;
  if (!c.out.empty()) o.out = fs::path(c.out);
  if (data_seed) {
    if (c.seed) config.data.seed = *c.seed;
  } else {
    o.seed = c.seed;
  }
  apply_overrides(config, o);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  neurop::retain_heap_memory();
  CLI::App app{"Neural operator pretraining, adapter fine-tuning and evaluation"};
  app.require_subcommand(1);

  Common common;
  auto* gen = app.add_subcommand("gen-data", "Generate train and validation datasets for every task");
  add_common(gen, common, true);
  auto* pre = app.add_subcommand("pretrain", "Train core and adapters on the pretraining tasks");
  add_common(pre, common, true);
  auto* fine = app.add_subcommand("finetune", "Train a new adapter on the fine-tune task with the core frozen");
  add_common(fine, common, true);
  std::string fine_checkpoint;
  fine->add_option("--checkpoint", fine_checkpoint, "Pretrained checkpoint (default <out>/pretrain/checkpoint.nock)");
  auto* scratch = app.add_subcommand("scratch", "Train a fresh model on the fine-tune task");
  add_common(scratch, common, true);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint and write a metrics record");
  add_common(eval, common, false);
  EvalRequest eval_req;
  std::string eval_checkpoint, eval_dataset, eval_record;
  eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint to evaluate (default <out>/finetune/checkpoint.nock)");
  eval->add_option("--task", eval_req.task, "Task id (default: the fine-tune task)");
  eval->add_option("--dataset", eval_dataset, "Dataset file (default: the task's validation split)");
  eval->add_option("--label", eval_req.label, "Row label in reports");
  eval->add_option("--record", eval_record, "Metrics record path (default <out>/eval/<phase>_<task>.json)");
  eval->add_flag("--oracle", eval_req.oracle, "Score the stored targets against themselves");

  auto* report = app.add_subcommand("report", "Tabulate metrics records");
  add_common(report, common, false);
  ReportRequest report_req;
  std::vector<std::string> records;
  report->add_option("records", records, "Metrics record files")->required();
  report->add_flag("--sort", report_req.sort, "Sort rows by NMAE, ascending");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config;
  }

  try {
    if (gen->parsed()) {
      cmd_gen_data(*load(common, true), std::cout);
    } else if (pre->parsed()) {
      cmd_pretrain(*load(common, false), std::cout);
    } else if (fine->parsed()) {
      std::optional<fs::path> ckpt;
      if (!fine_checkpoint.empty()) ckpt = fine_checkpoint;
      cmd_finetune(*load(common, false), std::cout, ckpt);
    } else if (scratch->parsed()) {
      cmd_scratch(*load(common, false), std::cout);
    } else if (eval->parsed()) {
      auto config = load(common, false);
      if (!eval_checkpoint.empty()) eval_req.checkpoint = eval_checkpoint;
      if (!eval_dataset.empty()) eval_req.dataset = eval_dataset;
      if (!eval_record.empty()) eval_req.out = eval_record;
      else if (!config && !common.out.empty()) eval_req.out = fs::path(common.out) / "record.json";
      cmd_eval(config ? &*config : nullptr, eval_req, std::cout);
    } else if (report->parsed()) {
      for (const auto& r : records) report_req.records.emplace_back(r);
      if (!common.out.empty()) report_req.out = fs::path(common.out);
      cmd_report(report_req, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return exit_ok;
}

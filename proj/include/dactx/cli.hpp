#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dactx/training.hpp"

namespace dactx {

// Flat key=value run configuration; see README for the key list.
struct RunConfig {
  std::string corpus_train;
  std::string corpus_validation;
  std::string corpus_test;
  std::string embedding_path;     // empty -> seeded random init
  std::string out_dir;
  std::string reference_dataset;  // "", "mrda" or "swda"
  ContextModelConfig model;
  Hyperparameters hp;

  void validate() const;
};

RunConfig load_run_config(const std::string& path);

// Canonical key order used for config.resolved and checkpoint metadata.
std::vector<std::pair<std::string, std::string>> config_kv(const RunConfig& config,
                                                           int resolved_max_len);

struct TrainOutcome {
  std::string run_dir;
  std::string checkpoint_path;
  std::string metrics_path;
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
};

TrainOutcome run_train(const RunConfig& config);
TrainOutcome cmd_train(const std::string& config_path);

struct EvalOutcome {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::int64_t total = 0;
  std::string confusion_path;
};

// corpus_dir must contain train.tsv / validation.tsv / test.tsv. With
// majority set, reports the majority-class baseline instead of the model.
EvalOutcome cmd_eval(const std::string& checkpoint_path, const std::string& corpus_dir,
                     const std::string& split, bool majority = false,
                     const std::string& out_dir = "");

struct SweepRow {
  int n_context = 0;
  double test_accuracy = 0.0;
  double reference = 0.0;  // paper-reported value when known, else 0
};

std::vector<SweepRow> cmd_sweep(const std::string& config_path, int n_from, int n_to);

void cmd_gen_synth(const std::string& grammar_path, std::uint64_t seed,
                   const std::string& out_dir);

// Paper-reported reference accuracy for a dataset/model/n combination;
// 0 when unknown. Informational only, never a gate.
double reference_accuracy(const std::string& dataset, ModelKind kind, CellKind cell,
                          int n_context);

// Full argv interface used by the binary; returns the process exit code.
int run_cli(int argc, const char* const* argv);

}  // namespace dactx

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dactx/context_model.hpp"

namespace dactx {

struct Hyperparameters {
  std::vector<int> filter_widths{3, 4, 5};
  int feature_maps = 100;
  double dropout_rate = 0.5;
  std::string activation = "relu";  // fixed by the architecture, validated
  std::string pooling = "1-max";    // fixed, validated
  int mini_batch_size = 50;
  int embedding_dim = 300;
  int epochs = 30;
  double lr0 = 0.1;
  double lr_decay = 0.9;
  int lr_decay_every = 2000;
  std::uint64_t seed = 1;
  int hidden_size = 300;
  double init_scale = 0.01;
  double rnn_init_scale = 0.08;
  double forget_bias = 1.0;
  double embedding_init_scale = 0.25;
  int averaging_start = 1;  // 1-based update index where averaging begins
  int max_len = 0;          // 0 -> 96th percentile of training utterance lengths

  void validate() const;
};

// lr0 * decay^floor(k / period) for update counter k.
double lr_at(const Hyperparameters& hp, std::int64_t update_count);

// Posterior over classes: softmax(W * dropout(rep) + b). Dropout applies in
// train mode only; eval mode is deterministic.
Tensor classify(Tape& tape, Tensor rep, Tensor clf_weight, Tensor clf_bias, double dropout_rate,
                bool train, Rng& rng);

// -log(posterior[gold]). The training loop itself goes through
// cross_entropy_with_logits, which computes the same value in log space.
Tensor cross_entropy(Tape& tape, Tensor posterior, int gold);

// Live parameters plus their running Polyak average.
struct TrainState {
  ModelParams model;
  std::vector<std::string> param_names;
  std::vector<std::vector<double>> averaged;
  std::int64_t update_count = 0;   // total asgd steps taken
  std::int64_t averaged_count = 0; // steps since averaging started
  int epoch = 0;

  explicit TrainState(ModelParams m);
  void zero_grads();
  ModelParams averaged_model() const;  // constant tensors holding the averages
};

// live <- live - lr_at(k) * grad; then fold the new iterate into the average.
// Gradients must already be mean-over-batch. Throws NumericError naming the
// parameter group on a non-finite gradient.
void asgd_step(TrainState& state, const Hyperparameters& hp);

struct MetricsRow {
  int epoch;
  std::string split;
  double accuracy;
  double loss;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

struct EvalResult {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::int64_t total = 0;
  std::vector<std::vector<std::int64_t>> confusion;  // [gold][predicted]
};

// Dropout-free evaluation; prediction is argmax of the posterior with ties
// going to the lowest class index.
EvalResult evaluate(const ModelParams& model, const EmbeddingTable& table,
                    const std::vector<ContextWindow>& windows, int max_len);

struct TrainResult {
  TrainState state;                    // state after the final epoch
  std::vector<std::vector<double>> best_averaged;  // averaged params at the best epoch
  std::vector<std::vector<double>> best_live;      // live params at the best epoch
  int best_epoch = -1;
  double best_val_accuracy = 0.0;
  std::vector<MetricsRow> metrics;

  ModelParams best_model() const;  // constants over best_averaged
};

// 30-epoch (hp.epochs) loop over shuffled mini-batches with per-epoch
// validation on the averaged parameters; keeps the best epoch (ties keep the
// earlier one). Deterministic given hp.seed.
TrainResult train(const Corpus& corpus, const ContextModelConfig& config,
                  const Hyperparameters& hp, const EmbeddingTable& table, int max_len);

}  // namespace dactx

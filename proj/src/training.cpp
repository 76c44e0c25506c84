#include "dactx/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace dactx {

void Hyperparameters::validate() const {
  if (filter_widths.empty()) throw ConfigError("filter_widths must not be empty");
  if (feature_maps < 1) throw ConfigError("feature_maps must be >= 1");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
    throw ConfigError("dropout_rate must be in [0, 1)");
  }
  if (activation != "relu") throw ConfigError("activation must be relu");
  if (pooling != "1-max") throw ConfigError("pooling must be 1-max");
  if (mini_batch_size < 1) throw ConfigError("mini_batch_size must be >= 1");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (lr0 <= 0.0) throw ConfigError("lr0 must be positive");
  if (lr_decay <= 0.0 || lr_decay > 1.0) throw ConfigError("lr_decay must be in (0, 1]");
  if (lr_decay_every < 1) throw ConfigError("lr_decay_every must be >= 1");
  if (hidden_size < 1) throw ConfigError("hidden_size must be >= 1");
  if (averaging_start < 1) throw ConfigError("averaging_start must be >= 1");
  if (max_len < 0) throw ConfigError("max_len must be >= 0");
}

double lr_at(const Hyperparameters& hp, std::int64_t update_count) {
  const auto periods = static_cast<double>(update_count / hp.lr_decay_every);
  return hp.lr0 * std::pow(hp.lr_decay, periods);
}

Tensor classify(Tape& tape, Tensor rep, Tensor clf_weight, Tensor clf_bias, double dropout_rate,
                bool train, Rng& rng) {
  Tensor dropped = dropout(tape, rep, dropout_rate, train, rng);
  Tensor logits = add(tape, matvec(tape, clf_weight, dropped), clf_bias);
  return softmax(tape, logits);
}

Tensor cross_entropy(Tape& tape, Tensor posterior, int gold) {
  if (gold < 0 || gold >= posterior.dim(0)) {
    throw ShapeError("cross_entropy: gold index " + std::to_string(gold) + " out of range for " +
                     shape_str(posterior.shape()));
  }
  return scale(tape, log(tape, pick(tape, posterior, gold)), -1.0);
}

TrainState::TrainState(ModelParams m) : model(std::move(m)) {
  for (const auto& nt : model.named_params()) {
    param_names.push_back(nt.first);
    averaged.push_back(nt.second.data());
  }
}

void TrainState::zero_grads() {
  for (Tensor t : model.trainable()) t.zero_grad();
}

ModelParams TrainState::averaged_model() const { return clone_with_values(model, averaged); }

void asgd_step(TrainState& state, const Hyperparameters& hp) {
  const double lr = lr_at(hp, state.update_count);
  auto slots = state.model.param_slots();
  for (std::size_t g = 0; g < slots.size(); ++g) {
    Tensor& t = *slots[g].second;
    if (!t.has_grad()) continue;
    auto& values = t.data();
    const auto& grad = t.grad();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(grad[i])) {
        throw NumericError("non-finite gradient in parameter group '" + slots[g].first + "'");
      }
      values[i] -= lr * grad[i];
    }
  }
  ++state.update_count;

  if (state.update_count >= hp.averaging_start) {
    ++state.averaged_count;
    const double inv = 1.0 / static_cast<double>(state.averaged_count);
    for (std::size_t g = 0; g < slots.size(); ++g) {
      const auto& values = slots[g].second->data();
      auto& avg = state.averaged[g];
      for (std::size_t i = 0; i < values.size(); ++i) avg[i] += (values[i] - avg[i]) * inv;
    }
  } else {
    for (std::size_t g = 0; g < slots.size(); ++g) state.averaged[g] = slots[g].second->data();
  }
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics file " + path);
  out << "epoch,split,accuracy,loss\n";
  char buf[64];
  for (const MetricsRow& r : rows) {
    out << r.epoch << ',' << r.split << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.accuracy);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.17g", r.loss);
    out << buf << '\n';
  }
}

namespace {

int argmax_lowest(const std::vector<double>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

EvalResult evaluate(const ModelParams& model, const EmbeddingTable& table,
                    const std::vector<ContextWindow>& windows, int max_len) {
  EvalResult res;
  const int classes = model.num_classes;
  res.confusion.assign(classes, std::vector<std::int64_t>(classes, 0));
  double loss_sum = 0.0;
  std::int64_t hits = 0;
  for (const ContextWindow& w : windows) {
    Tape tape;
    Tensor rep = model_forward(tape, w, model, table, max_len);
    Tensor logits = add(tape, matvec(tape, model.clf_weight, rep), model.clf_bias);
    const int gold = w.current_utterance().label_id;
    loss_sum += cross_entropy_with_logits(tape, logits, gold).value();
    const int pred = argmax_lowest(logits.data());
    ++res.confusion[gold][pred];
    if (pred == gold) ++hits;
  }
  res.total = static_cast<std::int64_t>(windows.size());
  if (res.total > 0) {
    res.accuracy = static_cast<double>(hits) / static_cast<double>(res.total);
    res.mean_loss = loss_sum / static_cast<double>(res.total);
  }
  return res;
}

ModelParams TrainResult::best_model() const {
  return clone_with_values(state.model, best_averaged);
}

TrainResult train(const Corpus& corpus, const ContextModelConfig& config,
                  const Hyperparameters& hp, const EmbeddingTable& table, int max_len) {
  hp.validate();
  config.validate();
  auto windows = make_context_windows(corpus, "train", config.n_context);
  auto val_windows = make_context_windows(corpus, "validation", config.n_context);
  if (windows.empty()) throw DataFormatError("training split has no windows");

  Rng init_rng(hp.seed);
  ModelParams model = init_model(config, table.dim, corpus.labels.size(), hp.filter_widths,
                                 hp.feature_maps, hp.hidden_size, hp.init_scale,
                                 hp.rnn_init_scale, hp.forget_bias, init_rng);
  TrainResult result{TrainState(std::move(model)), {}, {}, -1, 0.0, {}};
  TrainState& state = result.state;
  Rng dropout_rng(hp.seed ^ 0x5ee092a4c83aa21dull);

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    state.epoch = epoch;
    auto batches =
        shuffled_batches(static_cast<int>(windows.size()), hp.mini_batch_size, hp.seed, epoch);
    double loss_sum = 0.0;
    std::int64_t hits = 0;
    for (const auto& batch : batches) {
      state.zero_grads();
      Tape tape;
      Tensor batch_loss;
      for (int idx : batch) {
        const ContextWindow& w = windows[idx];
        Tensor rep = model_forward(tape, w, state.model, table, max_len);
        Tensor dropped = dropout(tape, rep, hp.dropout_rate, true, dropout_rng);
        Tensor logits =
            add(tape, matvec(tape, state.model.clf_weight, dropped), state.model.clf_bias);
        const int gold = w.current_utterance().label_id;
        Tensor loss = cross_entropy_with_logits(tape, logits, gold);
        batch_loss = batch_loss.defined() ? add(tape, batch_loss, loss) : loss;
        if (argmax_lowest(logits.data()) == gold) ++hits;
      }
      batch_loss = scale(tape, batch_loss, 1.0 / static_cast<double>(batch.size()));
      if (!std::isfinite(batch_loss.value())) {
        throw NumericError("training loss is not finite at epoch " + std::to_string(epoch));
      }
      loss_sum += batch_loss.value() * static_cast<double>(batch.size());
      tape.backward(batch_loss);
      asgd_step(state, hp);
    }

    const double train_acc =
        static_cast<double>(hits) / static_cast<double>(windows.size());
    const double train_loss = loss_sum / static_cast<double>(windows.size());
    result.metrics.push_back({epoch, "train", train_acc, train_loss});

    EvalResult val = evaluate(state.averaged_model(), table, val_windows, max_len);
    result.metrics.push_back({epoch, "validation", val.accuracy, val.mean_loss});

    if (val.accuracy > result.best_val_accuracy || result.best_epoch < 0) {
      result.best_val_accuracy = val.accuracy;
      result.best_epoch = epoch;
      result.best_averaged = state.averaged;
      result.best_live.clear();
      for (const auto& nt : state.model.named_params()) result.best_live.push_back(nt.second.data());
    }
  }
  return result;
}

}  // namespace dactx

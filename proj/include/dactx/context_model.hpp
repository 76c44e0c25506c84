#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dactx/attention.hpp"
#include "dactx/corpus.hpp"
#include "dactx/embeddings.hpp"
#include "dactx/encoder.hpp"
#include "dactx/recurrent.hpp"

namespace dactx {

enum class ModelKind {
  kBaselineI,
  kBaselineII,
  kMax,
  kAttention,
  kRnn,
  kRnnOutputAttention,
  kRnnInputAttention,
};

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind kind);
bool kind_uses_rnn(ModelKind kind);
bool kind_uses_attention(ModelKind kind);

struct ContextModelConfig {
  ModelKind kind = ModelKind::kBaselineI;
  CellKind cell = CellKind::kLstm;  // meaningful iff kind_uses_rnn
  int n_context = 0;

  void validate() const;
};

// Every trainable piece of one configured model, plus the classifier head.
struct ModelParams {
  ContextModelConfig config;
  ConvFilterBank bank;
  AttentionParams attention;  // defined iff kind_uses_attention
  RnnCell rnn;                // defined iff kind_uses_rnn
  Tensor clf_weight;          // [C x representation_dim]
  Tensor clf_bias;            // [C]
  int hidden_dim = 0;
  int num_classes = 0;

  int representation_dim() const;
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<std::pair<std::string, Tensor*>> param_slots();
  std::vector<Tensor> trainable() const;
};

ModelParams init_model(const ContextModelConfig& config, int embed_dim, int num_classes,
                       const std::vector<int>& filter_widths, int feature_maps, int hidden_dim,
                       double init_scale, double rnn_init_scale, double forget_bias, Rng& rng);

// Structural copy whose parameter tensors are fresh constants holding the
// given values (named_params order).
ModelParams clone_with_values(const ModelParams& src,
                              const std::vector<std::vector<double>>& values);

// Utterance vectors for a window, oldest context first, current last;
// valid[i] is false for pad slots (their tensors are left undefined).
struct EncodedWindow {
  std::vector<Tensor> vectors;
  std::vector<bool> valid;
};

EncodedWindow encode_window(Tape& tape, const ContextWindow& window, const ConvFilterBank& bank,
                            const EmbeddingTable& table, int max_len);

// The individual context-representation methods.
Tensor method_max(Tape& tape, const std::vector<Tensor>& vectors, const std::vector<bool>& valid);
Tensor method_attention(Tape& tape, const std::vector<Tensor>& vectors,
                        const std::vector<bool>& valid, const AttentionParams& attn);
Tensor method_rnn(Tape& tape, const std::vector<Tensor>& vectors, const std::vector<bool>& valid,
                  const RnnCell& cell);
Tensor method_rnn_output_attention(Tape& tape, const std::vector<Tensor>& vectors,
                                   const std::vector<bool>& valid, const RnnCell& cell,
                                   const AttentionParams& attn);
Tensor method_rnn_input_attention(Tape& tape, const std::vector<Tensor>& vectors,
                                  const std::vector<bool>& valid, const RnnCell& cell,
                                  const AttentionParams& attn);

// Baseline II: the non-pad utterance matrices concatenated along the length
// axis and encoded once; Baseline I is the n = 0 case.
Tensor baseline_concat(Tape& tape, const ContextWindow& window, const ConvFilterBank& bank,
                       const EmbeddingTable& table, int max_len);

// Dispatcher: window -> context representation for the classifier.
Tensor model_forward(Tape& tape, const ContextWindow& window, const ModelParams& params,
                     const EmbeddingTable& table, int max_len);

}  // namespace dactx

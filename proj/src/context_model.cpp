#include "dactx/context_model.hpp"

namespace dactx {

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "BASELINE_I") return ModelKind::kBaselineI;
  if (s == "BASELINE_II") return ModelKind::kBaselineII;
  if (s == "MAX") return ModelKind::kMax;
  if (s == "ATTENTION") return ModelKind::kAttention;
  if (s == "RNN") return ModelKind::kRnn;
  if (s == "RNN_OUTPUT_ATTENTION") return ModelKind::kRnnOutputAttention;
  if (s == "RNN_INPUT_ATTENTION") return ModelKind::kRnnInputAttention;
  throw ConfigError("unknown model kind '" + s + "'");
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kBaselineI: return "BASELINE_I";
    case ModelKind::kBaselineII: return "BASELINE_II";
    case ModelKind::kMax: return "MAX";
    case ModelKind::kAttention: return "ATTENTION";
    case ModelKind::kRnn: return "RNN";
    case ModelKind::kRnnOutputAttention: return "RNN_OUTPUT_ATTENTION";
    case ModelKind::kRnnInputAttention: return "RNN_INPUT_ATTENTION";
  }
  throw ConfigError("invalid model kind");
}

bool kind_uses_rnn(ModelKind kind) {
  return kind == ModelKind::kRnn || kind == ModelKind::kRnnOutputAttention ||
         kind == ModelKind::kRnnInputAttention;
}

bool kind_uses_attention(ModelKind kind) {
  return kind == ModelKind::kAttention || kind == ModelKind::kRnnOutputAttention ||
         kind == ModelKind::kRnnInputAttention;
}

void ContextModelConfig::validate() const {
  if (n_context < 0 || n_context > 5) {
    throw ConfigError("n_context must be in 0..5, got " + std::to_string(n_context));
  }
  if (kind == ModelKind::kBaselineI && n_context != 0) {
    throw ConfigError("BASELINE_I ignores context; n_context must be 0");
  }
}

int ModelParams::representation_dim() const {
  return kind_uses_rnn(config.kind) ? hidden_dim : bank.output_dim();
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::param_slots() {
  std::vector<std::pair<std::string, Tensor*>> out;
  for (std::size_t wi = 0; wi < bank.widths.size(); ++wi) {
    const std::string w = std::to_string(bank.widths[wi]);
    out.emplace_back("conv.w" + w + ".weight", &bank.weights[wi]);
    if (bank.use_bias) out.emplace_back("conv.w" + w + ".bias", &bank.biases[wi]);
  }
  if (kind_uses_attention(config.kind)) out.emplace_back("attn.w", &attention.w);
  if (kind_uses_rnn(config.kind)) {
    for (auto& st : rnn.slots("rnn.")) out.push_back(st);
  }
  out.emplace_back("clf.weight", &clf_weight);
  out.emplace_back("clf.bias", &clf_bias);
  return out;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (auto& st : const_cast<ModelParams*>(this)->param_slots()) out.emplace_back(st.first, *st.second);
  return out;
}

ModelParams clone_with_values(const ModelParams& src,
                              const std::vector<std::vector<double>>& values) {
  ModelParams copy = src;
  auto slots = copy.param_slots();
  if (slots.size() != values.size()) {
    throw ConfigError("clone_with_values: expected " + std::to_string(slots.size()) +
                      " parameter groups, got " + std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    *slots[i].second = Tensor::from_data(slots[i].second->shape(), values[i]);
  }
  return copy;
}

std::vector<Tensor> ModelParams::trainable() const {
  std::vector<Tensor> out;
  for (const auto& nt : named_params()) out.push_back(nt.second);
  return out;
}

ModelParams init_model(const ContextModelConfig& config, int embed_dim, int num_classes,
                       const std::vector<int>& filter_widths, int feature_maps, int hidden_dim,
                       double init_scale, double rnn_init_scale, double forget_bias, Rng& rng) {
  config.validate();
  if (num_classes < 2) throw ConfigError("need at least two classes");
  ModelParams m;
  m.config = config;
  m.num_classes = num_classes;
  m.hidden_dim = hidden_dim;
  m.bank = make_filter_bank(embed_dim, filter_widths, feature_maps, init_scale, true, rng);
  const int enc_dim = m.bank.output_dim();
  if (kind_uses_rnn(config.kind)) {
    m.rnn = make_rnn_cell(config.cell, enc_dim, hidden_dim, rnn_init_scale, forget_bias, rng);
  }
  if (kind_uses_attention(config.kind)) {
    // method (d) attends over RNN outputs, (b) and (e) over utterance vectors
    const int attn_dim = config.kind == ModelKind::kRnnOutputAttention ? hidden_dim : enc_dim;
    m.attention = make_attention_params(attn_dim, init_scale, rng);
  }
  m.clf_weight = Tensor::uniform_param({num_classes, m.representation_dim()}, init_scale, rng);
  m.clf_bias = Tensor::param({num_classes}, std::vector<double>(num_classes, 0.0));
  return m;
}

EncodedWindow encode_window(Tape& tape, const ContextWindow& window, const ConvFilterBank& bank,
                            const EmbeddingTable& table, int max_len) {
  EncodedWindow out;
  const int pads = window.pad_count();
  for (int i = 0; i < pads; ++i) {
    out.vectors.push_back(Tensor());
    out.valid.push_back(false);
  }
  for (int i = 0; i < window.context_size(); ++i) {
    Tensor m = embed_utterance(tape, window.context_at(i), table, max_len);
    out.vectors.push_back(encode_utterance(tape, m, bank));
    out.valid.push_back(true);
  }
  Tensor cur = embed_utterance(tape, window.current_utterance(), table, max_len);
  out.vectors.push_back(encode_utterance(tape, cur, bank));
  out.valid.push_back(true);
  return out;
}

Tensor method_max(Tape& tape, const std::vector<Tensor>& vectors,
                  const std::vector<bool>& valid) {
  std::vector<Tensor> live;
  for (std::size_t i = 0; i < vectors.size(); ++i)
    if (valid[i]) live.push_back(vectors[i]);
  if (live.empty()) throw ShapeError("method_max: all positions masked");
  if (live.size() == 1) return live[0];
  return max_pool(tape, stack_rows(tape, live), {0}).values;
}

Tensor method_attention(Tape& tape, const std::vector<Tensor>& vectors,
                        const std::vector<bool>& valid, const AttentionParams& attn) {
  Tensor alphas = attention_weights(tape, vectors, valid, attn);
  return attentive_sum(tape, vectors, alphas, valid);
}

Tensor method_rnn(Tape& tape, const std::vector<Tensor>& vectors, const std::vector<bool>& valid,
                  const RnnCell& cell) {
  return run_sequence(tape, vectors, valid, cell, {}).last.h;
}

Tensor method_rnn_output_attention(Tape& tape, const std::vector<Tensor>& vectors,
                                   const std::vector<bool>& valid, const RnnCell& cell,
                                   const AttentionParams& attn) {
  SequenceResult run = run_sequence(tape, vectors, valid, cell, {});
  Tensor alphas = attention_weights(tape, run.outputs, valid, attn);
  return attentive_sum(tape, run.outputs, alphas, valid);
}

Tensor method_rnn_input_attention(Tape& tape, const std::vector<Tensor>& vectors,
                                  const std::vector<bool>& valid, const RnnCell& cell,
                                  const AttentionParams& attn) {
  Tensor alphas = attention_weights(tape, vectors, valid, attn);
  std::vector<Tensor> weighted = order_preserved(tape, vectors, alphas, valid);
  return run_sequence(tape, weighted, valid, cell, {}).last.h;
}

Tensor baseline_concat(Tape& tape, const ContextWindow& window, const ConvFilterBank& bank,
                       const EmbeddingTable& table, int max_len) {
  std::vector<Tensor> matrices;
  for (int i = 0; i < window.context_size(); ++i) {
    matrices.push_back(embed_utterance(tape, window.context_at(i), table, max_len));
  }
  matrices.push_back(embed_utterance(tape, window.current_utterance(), table, max_len));
  Tensor joined = matrices.size() == 1 ? matrices[0] : concat(tape, matrices, 1);
  return encode_utterance(tape, joined, bank);
}

Tensor model_forward(Tape& tape, const ContextWindow& window, const ModelParams& params,
                     const EmbeddingTable& table, int max_len) {
  if (window.n != params.config.n_context) {
    throw ConfigError("window has n=" + std::to_string(window.n) + " but the model expects " +
                      std::to_string(params.config.n_context));
  }
  switch (params.config.kind) {
    case ModelKind::kBaselineI: {
      Tensor cur = embed_utterance(tape, window.current_utterance(), table, max_len);
      return encode_utterance(tape, cur, params.bank);
    }
    case ModelKind::kBaselineII:
      return baseline_concat(tape, window, params.bank, table, max_len);
    default: break;
  }
  EncodedWindow enc = encode_window(tape, window, params.bank, table, max_len);
  switch (params.config.kind) {
    case ModelKind::kMax: return method_max(tape, enc.vectors, enc.valid);
    case ModelKind::kAttention:
      return method_attention(tape, enc.vectors, enc.valid, params.attention);
    case ModelKind::kRnn: return method_rnn(tape, enc.vectors, enc.valid, params.rnn);
    case ModelKind::kRnnOutputAttention:
      return method_rnn_output_attention(tape, enc.vectors, enc.valid, params.rnn,
                                         params.attention);
    case ModelKind::kRnnInputAttention:
      return method_rnn_input_attention(tape, enc.vectors, enc.valid, params.rnn,
                                        params.attention);
    default: throw ConfigError("unhandled model kind");
  }
}

}  // namespace dactx

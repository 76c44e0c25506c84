#include "dactx/attention.hpp"

namespace dactx {

AttentionParams make_attention_params(int dim, double init_scale, Rng& rng) {
  if (dim < 1) throw ConfigError("attention dim must be >= 1");
  return AttentionParams{Tensor::uniform_param({dim}, init_scale, rng)};
}

Tensor score(Tape& tape, Tensor u, const AttentionParams& params) {
  return dot(tape, params.w, u);
}

namespace {

void check_sequence(const std::vector<Tensor>& sequence, const std::vector<bool>& valid,
                    const char* op) {
  if (sequence.size() != valid.size()) {
    throw ShapeError(std::string(op) + ": sequence length " + std::to_string(sequence.size()) +
                     " does not match mask length " + std::to_string(valid.size()));
  }
  bool any = false;
  for (bool v : valid) any = any || v;
  if (!any) throw ShapeError(std::string(op) + ": all positions masked");
}

}  // namespace

Tensor attention_weights(Tape& tape, const std::vector<Tensor>& sequence,
                         const std::vector<bool>& valid, const AttentionParams& params) {
  check_sequence(sequence, valid, "attention_weights");
  std::vector<Tensor> scores;
  scores.reserve(sequence.size());
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    scores.push_back(valid[i] ? score(tape, sequence[i], params) : Tensor::scalar(0.0));
  }
  return masked_softmax(tape, stack_scalars(tape, scores), valid);
}

Tensor attentive_sum(Tape& tape, const std::vector<Tensor>& sequence, Tensor alphas,
                     const std::vector<bool>& valid) {
  check_sequence(sequence, valid, "attentive_sum");
  if (alphas.ndim() != 1 || alphas.dim(0) != static_cast<int>(sequence.size())) {
    throw ShapeError("attentive_sum: weights " + shape_str(alphas.shape()) +
                     " do not match sequence length " + std::to_string(sequence.size()));
  }
  Tensor acc;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (!valid[i]) continue;
    Tensor term = scalar_mul(tape, sequence[i], pick(tape, alphas, static_cast<int>(i)));
    acc = acc.defined() ? add(tape, acc, term) : term;
  }
  return acc;
}

std::vector<Tensor> order_preserved(Tape& tape, const std::vector<Tensor>& sequence,
                                    Tensor alphas, const std::vector<bool>& valid) {
  check_sequence(sequence, valid, "order_preserved");
  if (alphas.ndim() != 1 || alphas.dim(0) != static_cast<int>(sequence.size())) {
    throw ShapeError("order_preserved: weights " + shape_str(alphas.shape()) +
                     " do not match sequence length " + std::to_string(sequence.size()));
  }
  int dim = 0;
  for (std::size_t i = 0; i < sequence.size(); ++i)
    if (valid[i]) dim = sequence[i].dim(0);

  std::vector<Tensor> out;
  out.reserve(sequence.size());
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    if (valid[i]) {
      out.push_back(scalar_mul(tape, sequence[i], pick(tape, alphas, static_cast<int>(i))));
    } else {
      out.push_back(Tensor::zeros({dim}));
    }
  }
  return out;
}

}  // namespace dactx

#pragma once

#include <vector>

#include "dactx/tensor.hpp"

namespace dactx {

// Linear scoring attention over a sequence of vectors. Scores are w^T u with
// no bias term; weights are a masked softmax so padded positions get exactly
// zero attention.
struct AttentionParams {
  Tensor w;
};

AttentionParams make_attention_params(int dim, double init_scale, Rng& rng);

Tensor score(Tape& tape, Tensor u, const AttentionParams& params);  // scalar w^T u

// Softmax of scores over valid positions; invalid positions get alpha == 0.
Tensor attention_weights(Tape& tape, const std::vector<Tensor>& sequence,
                         const std::vector<bool>& valid, const AttentionParams& params);

// Weighted sum over valid positions; the convex combination of the inputs.
Tensor attentive_sum(Tape& tape, const std::vector<Tensor>& sequence, Tensor alphas,
                     const std::vector<bool>& valid);

// Order-preserved variant: each vector scaled by its weight, sequence
// structure kept. Masked positions yield zero vectors.
std::vector<Tensor> order_preserved(Tape& tape, const std::vector<Tensor>& sequence,
                                    Tensor alphas, const std::vector<bool>& valid);

}  // namespace dactx

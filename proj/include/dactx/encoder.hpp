#pragma once

#include <cstdint>
#include <vector>

#include "dactx/tensor.hpp"

namespace dactx {

// Multi-window convolutional sentence encoder: for each filter width, a bank
// of feature maps spanning all embedding dimensions; ReLU; 1-max pooling per
// map; concatenation in ascending-width order.
struct ConvFilterBank {
  std::vector<int> widths;      // ascending, distinct
  int feature_maps = 0;
  int input_dim = 0;            // d
  bool use_bias = true;
  std::vector<Tensor> weights;  // per width: [maps x d x width]
  std::vector<Tensor> biases;   // per width: [maps]

  int output_dim() const { return static_cast<int>(widths.size()) * feature_maps; }
  std::vector<Tensor> trainable() const;
};

ConvFilterBank make_filter_bank(int input_dim, std::vector<int> widths, int feature_maps,
                                double init_scale, bool use_bias, Rng& rng);

// Same-length convolution of a d x L matrix with one d x width filter plus a
// scalar bias: output position y sums filter(i, j) * input(i, y + off - j)
// with off = width/2 and zero extension past both edges.
Tensor convolve(Tape& tape, Tensor input, Tensor filter, Tensor bias);

// Whole bank of one width at once: [maps x L].
Tensor conv_bank(Tape& tape, Tensor input, Tensor weight, Tensor bias, bool use_bias);

// d x L matrix -> vector of length widths * feature_maps, entries >= 0.
Tensor encode_utterance(Tape& tape, Tensor matrix, const ConvFilterBank& bank);

}  // namespace dactx

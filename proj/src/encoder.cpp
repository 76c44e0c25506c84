#include "dactx/encoder.hpp"

#include <algorithm>
#include <set>

namespace dactx {

std::vector<Tensor> ConvFilterBank::trainable() const {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    out.push_back(weights[i]);
    if (use_bias) out.push_back(biases[i]);
  }
  return out;
}

ConvFilterBank make_filter_bank(int input_dim, std::vector<int> widths, int feature_maps,
                                double init_scale, bool use_bias, Rng& rng) {
  if (widths.empty()) throw ConfigError("filter bank needs at least one width");
  std::set<int> distinct(widths.begin(), widths.end());
  if (distinct.size() != widths.size()) throw ConfigError("filter widths must be distinct");
  std::sort(widths.begin(), widths.end());
  if (widths.front() < 1) throw ConfigError("filter widths must be >= 1");
  if (feature_maps < 1) throw ConfigError("feature_maps must be >= 1");

  ConvFilterBank bank;
  bank.widths = widths;
  bank.feature_maps = feature_maps;
  bank.input_dim = input_dim;
  bank.use_bias = use_bias;
  for (int w : widths) {
    bank.weights.push_back(Tensor::uniform_param({feature_maps, input_dim, w}, init_scale, rng));
    bank.biases.push_back(use_bias ? Tensor::param({feature_maps},
                                                   std::vector<double>(feature_maps, 0.0))
                                   : Tensor::zeros({feature_maps}));
  }
  return bank;
}

Tensor conv_bank(Tape& tape, Tensor input, Tensor weight, Tensor bias, bool use_bias) {
  if (input.ndim() != 2 || weight.ndim() != 3 || weight.dim(1) != input.dim(0)) {
    throw ShapeError("conv_bank: incompatible input " + shape_str(input.shape()) +
                     " and weight " + shape_str(weight.shape()));
  }
  const int d = input.dim(0), len = input.dim(1);
  const int maps = weight.dim(0), width = weight.dim(2);
  if (bias.ndim() != 1 || bias.dim(0) != maps) {
    throw ShapeError("conv_bank: bias " + shape_str(bias.shape()) + " does not match " +
                     std::to_string(maps) + " maps");
  }
  const int off = width / 2;

  const auto& X = input.data();
  const auto& W = weight.data();
  std::vector<double> out(static_cast<std::size_t>(maps) * len, 0.0);
  for (int m = 0; m < maps; ++m) {
    const double b = use_bias ? bias.data()[m] : 0.0;
    for (int y = 0; y < len; ++y) {
      double acc = b;
      for (int j = 0; j < width; ++j) {
        const int p = y + off - j;
        if (p < 0 || p >= len) continue;  // zero extension
        const std::size_t wbase = (static_cast<std::size_t>(m) * d) * width + j;
        for (int i = 0; i < d; ++i) acc += W[wbase + static_cast<std::size_t>(i) * width] * X[static_cast<std::size_t>(i) * len + p];
      }
      out[static_cast<std::size_t>(m) * len + y] = acc;
    }
  }

  Tensor y = Tensor::from_data({maps, len}, std::move(out));
  const bool needs = input.needs_grad() || weight.needs_grad() || (use_bias && bias.needs_grad());
  if (needs) {
    y.set_needs_grad(true);
    tape.record([input, weight, bias, y, d, len, maps, width, off, use_bias]() mutable {
      const auto& G = y.grad();
      const auto& X = input.data();
      const auto& W = weight.data();
      if (weight.needs_grad()) {
        auto& dW = weight.grad();
        for (int m = 0; m < maps; ++m)
          for (int yp = 0; yp < len; ++yp) {
            const double g = G[static_cast<std::size_t>(m) * len + yp];
            if (g == 0.0) continue;
            for (int j = 0; j < width; ++j) {
              const int p = yp + off - j;
              if (p < 0 || p >= len) continue;
              for (int i = 0; i < d; ++i)
                dW[(static_cast<std::size_t>(m) * d + i) * width + j] +=
                    g * X[static_cast<std::size_t>(i) * len + p];
            }
          }
      }
      if (use_bias && bias.needs_grad()) {
        auto& dB = bias.grad();
        for (int m = 0; m < maps; ++m) {
          double acc = 0.0;
          for (int yp = 0; yp < len; ++yp) acc += G[static_cast<std::size_t>(m) * len + yp];
          dB[m] += acc;
        }
      }
      if (input.needs_grad()) {
        auto& dX = input.grad();
        for (int m = 0; m < maps; ++m)
          for (int yp = 0; yp < len; ++yp) {
            const double g = G[static_cast<std::size_t>(m) * len + yp];
            if (g == 0.0) continue;
            for (int j = 0; j < width; ++j) {
              const int p = yp + off - j;
              if (p < 0 || p >= len) continue;
              for (int i = 0; i < d; ++i)
                dX[static_cast<std::size_t>(i) * len + p] +=
                    g * W[(static_cast<std::size_t>(m) * d + i) * width + j];
            }
          }
      }
    });
  }
  return y;
}

Tensor convolve(Tape& tape, Tensor input, Tensor filter, Tensor bias) {
  if (filter.ndim() != 2) {
    throw ShapeError("convolve: expected d x width filter, got " + shape_str(filter.shape()));
  }
  const int d = filter.dim(0), width = filter.dim(1);
  Tensor w3 = reshape(tape, filter, {1, d, width});
  Tensor out = conv_bank(tape, input, w3, bias, true);
  return reshape(tape, out, {input.dim(1)});
}

Tensor encode_utterance(Tape& tape, Tensor matrix, const ConvFilterBank& bank) {
  if (matrix.ndim() != 2 || matrix.dim(0) != bank.input_dim) {
    throw ShapeError("encode_utterance: input " + shape_str(matrix.shape()) +
                     " does not match encoder dim " + std::to_string(bank.input_dim));
  }
  std::vector<Tensor> pooled;
  for (std::size_t wi = 0; wi < bank.widths.size(); ++wi) {
    Tensor activ = relu(tape, conv_bank(tape, matrix, bank.weights[wi], bank.biases[wi],
                                        bank.use_bias));
    pooled.push_back(max_pool(tape, activ, {1}).values);  // 1-max over positions
  }
  return concat(tape, pooled, 0);
}

}  // namespace dactx

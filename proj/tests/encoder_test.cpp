#include "dactx/encoder.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"

using namespace dactx;

namespace {

// Independent straight-line references, no tape.

// out(y) = bias + sum_i sum_{j=-w/2}^{w-1-w/2} filter(i, j + w/2) * input(i, y - j),
// with zero extension outside [0, L).
std::vector<double> naive_convolve(const std::vector<double>& input, int d, int len,
                                   const std::vector<double>& filter, int width, double bias) {
  const int off = width / 2;
  std::vector<double> out(static_cast<std::size_t>(len), 0.0);
  for (int y = 0; y < len; ++y) {
    double acc = bias;
    for (int i = 0; i < d; ++i) {
      for (int j = -off; j <= width - 1 - off; ++j) {
        const int p = y - j;
        if (p < 0 || p >= len) continue;
        acc += filter[static_cast<std::size_t>(i) * width + (j + off)] *
               input[static_cast<std::size_t>(i) * len + p];
      }
    }
    out[y] = acc;
  }
  return out;
}

std::vector<double> naive_encode(const std::vector<double>& matrix, int d, int len,
                                 const ConvFilterBank& bank) {
  std::vector<double> vec;
  for (std::size_t wi = 0; wi < bank.widths.size(); ++wi) {
    const int width = bank.widths[wi];
    for (int m = 0; m < bank.feature_maps; ++m) {
      std::vector<double> filter(static_cast<std::size_t>(d) * width);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < width; ++j)
          filter[static_cast<std::size_t>(i) * width + j] =
              bank.weights[wi].data()[(static_cast<std::size_t>(m) * d + i) * width + j];
      const double bias = bank.use_bias ? bank.biases[wi].data()[m] : 0.0;
      auto conv = naive_convolve(matrix, d, len, filter, width, bias);
      double best = 0.0;  // ReLU floor
      for (double v : conv) best = std::max(best, v);
      vec.push_back(best);
    }
  }
  return vec;
}

std::vector<double> random_values(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return v;
}

}  // namespace

TEST_SUITE_BEGIN("encoder");

TEST_CASE("convolve trivial cases") {
  Tape tape;
  Tensor zero_in = Tensor::zeros({3, 5});
  Tensor filt = Tensor::from_data({3, 3}, std::vector<double>(9, 0.7));
  Tensor out = convolve(tape, zero_in, filt, Tensor::scalar(0.0));
  for (double v : out.data()) CHECK(v == 0.0);

  // identity filter of width 1
  Tensor in = Tensor::from_data({1, 3}, {1, 2, 3});
  Tensor ident = Tensor::from_data({1, 1}, {1.0});
  Tensor y = convolve(tape, in, ident, Tensor::scalar(0.0));
  CHECK(y.data() == std::vector<double>{1, 2, 3});

  Tensor wrong_d = Tensor::from_data({2, 1}, {1.0, 1.0});
  CHECK_THROWS_AS(convolve(tape, in, wrong_d, Tensor::scalar(0.0)), ShapeError);
}

TEST_CASE("convolve matches the naive oracle") {
  // filter wider than the input is still valid under zero extension
  for (int width : {1, 2, 3, 4, 5, 9}) {
    Rng rng(11);
    const int d = 4, len = 7;
    auto xv = random_values(rng, static_cast<std::size_t>(d) * len);
    auto fv = random_values(rng, static_cast<std::size_t>(d) * width);
    const double bias = rng.uniform(-0.5, 0.5);
    Tape tape;
    Tensor out = convolve(tape, Tensor::from_data({d, len}, xv),
                          Tensor::from_data({d, width}, fv), Tensor::scalar(bias));
    auto expect = naive_convolve(xv, d, len, fv, width, bias);
    REQUIRE(out.size() == len);
    for (int y = 0; y < len; ++y)
      CHECK(out.data()[y] == doctest::Approx(expect[y]).epsilon(1e-12));
  }
}

TEST_CASE("encode_utterance shape and zero case") {
  Rng rng(5);
  ConvFilterBank bank = make_filter_bank(6, {3, 4, 5}, 100, 0.01, true, rng);
  CHECK(bank.output_dim() == 300);
  Tape tape;
  Tensor vec = encode_utterance(tape, Tensor::zeros({6, 9}), bank);
  CHECK(vec.size() == 300);
  for (double v : vec.data()) CHECK(v == 0.0);  // zero input, zero bias

  CHECK_THROWS_AS(encode_utterance(tape, Tensor::zeros({5, 9}), bank), ShapeError);
  CHECK_THROWS_AS(make_filter_bank(6, {3, 3}, 4, 0.01, true, rng), ConfigError);
}

TEST_CASE("encode_utterance equals the straight-line reference") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const int d = 2 + static_cast<int>(rng.index(6));  // 2..7
    const int len = 1 + static_cast<int>(rng.index(7));
    ConvFilterBank bank = make_filter_bank(d, {3, 4, 5}, 3, 0.5, true, rng);
    for (auto& b : bank.biases) {
      for (double& v : b.data()) v = rng.uniform(-0.5, 0.5);
    }
    auto xv = random_values(rng, static_cast<std::size_t>(d) * len);
    Tape tape;
    Tensor got = encode_utterance(tape, Tensor::from_data({d, len}, xv), bank);
    auto expect = naive_encode(xv, d, len, bank);
    REQUIRE(got.size() == static_cast<std::int64_t>(expect.size()));
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(got.data()[i] == doctest::Approx(expect[i]).epsilon(1e-12));
      CHECK(got.data()[i] >= 0.0);  // post-ReLU max pooling
    }
  }
}

TEST_CASE("1-max pooling absorbs interior shifts") {
  Rng rng(17);
  const int d = 3, len = 15;
  ConvFilterBank bank = make_filter_bank(d, {3, 4, 5}, 4, 0.3, true, rng);
  for (auto& b : bank.biases)
    for (double& v : b.data()) v = rng.uniform(-0.3, 0.3);

  std::vector<double> content = random_values(rng, static_cast<std::size_t>(d) * 3, 2.0);
  auto place = [&](int start) {
    std::vector<double> m(static_cast<std::size_t>(d) * len, 0.0);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < 3; ++j)
        m[static_cast<std::size_t>(i) * len + start + j] = content[static_cast<std::size_t>(i) * 3 + j];
    return m;
  };
  Tape tape;
  Tensor a = encode_utterance(tape, Tensor::from_data({d, len}, place(6)), bank);
  Tensor b = encode_utterance(tape, Tensor::from_data({d, len}, place(7)), bank);
  for (std::int64_t i = 0; i < a.size(); ++i)
    CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-12));
}

TEST_CASE("gradient check through the encoder") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed * 31);
    const int d = 4, len = 6;
    ConvFilterBank bank = make_filter_bank(d, {3, 5}, 2, 0.4, true, rng);
    Tensor x = Tensor::uniform_param({d, len}, 1.0, rng);
    Tensor probe = Tensor::from_data({2 * 2}, random_values(rng, 4));
    auto f = [&](Tape& t) -> Tensor {
      Tensor enc = encode_utterance(t, x, bank);
      return dot(t, enc, probe);  // scalar projection so max choices matter
    };
    std::vector<Tensor> leaves = bank.trainable();
    leaves.push_back(x);
    GradCheckResult r = grad_check(f, leaves, 1e-5, 1e-4);
    INFO(r.worst);
    CHECK(r.pass);
  }
}

TEST_SUITE_END();

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dactx/error.hpp"
#include "dactx/rng.hpp"

namespace dactx {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

// Dense row-major tensor of 64-bit floats. A Tensor is a cheap shared handle
// to its storage; the gradient buffer lives next to the values and is filled
// in by Tape::backward. All dimension sizes are positive and all values must
// be finite; violations throw.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double v);
  // Trainable leaf: requires_grad set, Tape::backward accumulates into grad().
  static Tensor param(Shape shape, std::vector<double> data);
  static Tensor uniform_param(Shape shape, double scale, Rng& rng);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int dim(int axis) const { return impl_->shape[axis]; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(impl_->data.size()); }

  const std::vector<double>& data() const { return impl_->data; }
  std::vector<double>& data() { return impl_->data; }

  // Allocated (zero-filled) on first access.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  bool has_grad() const { return !impl_->grad.empty(); }
  void zero_grad();

  bool requires_grad() const { return impl_->requires_grad; }
  // True when gradient flows through this tensor on some tape.
  bool needs_grad() const { return impl_->needs_grad; }
  void set_needs_grad(bool v) { impl_->needs_grad = v; }

  double value() const;  // scalar tensors only
  double at(int i) const { return impl_->data[static_cast<std::size_t>(i)]; }
  double at(int i, int j) const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    bool needs_grad = false;
  };
  std::shared_ptr<Impl> impl_;

  static Tensor make(Shape shape, std::vector<double> data, bool requires_grad,
                     bool check_finite);
};

// Reverse-mode tape. Each op appends its backward closure as it executes;
// backward() replays every closure exactly once in reverse order.
class Tape {
 public:
  void record(std::function<void()> backward_fn) { ops_.push_back(std::move(backward_fn)); }

  // Seeds d loss / d loss = 1 and propagates to every recorded input.
  // The loss must be a scalar.
  void backward(const Tensor& loss);

  std::size_t size() const { return ops_.size(); }

 private:
  std::vector<std::function<void()>> ops_;
};

// ---------------------------------------------------------------------------
// Primitive operations. Binary elementwise ops require identical shapes.

Tensor matmul(Tape& tape, Tensor a, Tensor b);
Tensor matvec(Tape& tape, Tensor w, Tensor x);
Tensor dot(Tape& tape, Tensor a, Tensor b);

Tensor add(Tape& tape, Tensor a, Tensor b);
Tensor sub(Tape& tape, Tensor a, Tensor b);
Tensor mul(Tape& tape, Tensor a, Tensor b);
Tensor scale(Tape& tape, Tensor x, double c);
Tensor relu(Tape& tape, Tensor x);
Tensor tanh(Tape& tape, Tensor x);
Tensor sigmoid(Tape& tape, Tensor x);
Tensor exp(Tape& tape, Tensor x);
Tensor log(Tape& tape, Tensor x);

// Max-subtracted softmax over a 1-D tensor.
Tensor softmax(Tape& tape, Tensor x);
// Softmax over the valid positions only; invalid positions get exactly 0.
Tensor masked_softmax(Tape& tape, Tensor x, const std::vector<bool>& valid);

struct MaxPoolResult {
  Tensor values;
  std::vector<std::int64_t> argmax;  // flat input index per output element
};
// Maximum over the given axes; gradient routes to the argmax element only,
// ties broken by lowest flat index. Reducing every axis yields a scalar.
MaxPoolResult max_pool(Tape& tape, Tensor x, const std::vector<int>& axes);

Tensor concat(Tape& tape, std::vector<Tensor> parts, int axis);
Tensor reshape(Tape& tape, Tensor x, Shape shape);

// Inverted dropout: train mode zeroes each element with probability rate and
// scales survivors by 1/(1-rate); eval mode returns the input unchanged.
Tensor dropout(Tape& tape, Tensor x, double rate, bool train, Rng& rng);

Tensor sum(Tape& tape, Tensor x);
Tensor mean(Tape& tape, Tensor x);
Tensor pick(Tape& tape, Tensor x, int index);  // 1-D -> scalar
Tensor stack_rows(Tape& tape, std::vector<Tensor> rows);      // m of [k] -> [m x k]
Tensor stack_scalars(Tape& tape, std::vector<Tensor> xs);     // m of [1] -> [m]
Tensor scalar_mul(Tape& tape, Tensor v, Tensor s);     // v * scalar tensor

// loss = logsumexp(logits) - logits[gold]; backward is softmax - onehot.
// This is the log-space route used wherever a softmax feeds a likelihood.
Tensor cross_entropy_with_logits(Tape& tape, Tensor logits, int gold);

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.

struct GradCheckResult {
  bool pass = false;
  double max_rel_error = 0.0;
  std::string worst;  // human-readable locus of the worst coordinate
};

// f must be scalar-valued and deterministic; every leaf is perturbed
// coordinatewise with +-step. rel = |a-n| / max(floor, |a|, |n|).
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f,
                           const std::vector<Tensor>& leaves, double step,
                           double tol, double abs_floor = 1e-8);

}  // namespace dactx

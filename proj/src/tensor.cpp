#include "dactx/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace dactx {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << " ";
    os << s[i];
  }
  os << "]";
  return os.str();
}

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

namespace {

void check_shape(const Shape& s) {
  if (s.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (int d : s) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(s));
  }
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite value");
  }
}

void check_same_shape(Tensor a, Tensor b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

}  // namespace

Tensor Tensor::make(Shape shape, std::vector<double> data, bool requires_grad,
                    bool finite_scan) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  }
  if (finite_scan) check_finite(data, "tensor");
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(data);
  t.impl_->requires_grad = requires_grad;
  t.impl_->needs_grad = requires_grad;
  return t;
}

Tensor Tensor::zeros(Shape shape) {
  check_shape(shape);
  std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  return make(std::move(shape), std::move(d), false, false);
}

Tensor Tensor::full(Shape shape, double value) {
  check_shape(shape);
  std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)), value);
  return make(std::move(shape), std::move(d), false, true);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  return make(std::move(shape), std::move(data), false, true);
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

Tensor Tensor::param(Shape shape, std::vector<double> data) {
  return make(std::move(shape), std::move(data), true, true);
}

Tensor Tensor::uniform_param(Shape shape, double scale, Rng& rng) {
  check_shape(shape);
  std::vector<double> d(static_cast<std::size_t>(shape_numel(shape)));
  for (double& x : d) x = rng.uniform(-scale, scale);
  return make(std::move(shape), std::move(d), true, false);
}

std::vector<double>& Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
  return const_cast<Tensor*>(this)->grad();
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

double Tensor::value() const {
  if (size() != 1) throw ShapeError("value() on non-scalar tensor " + shape_str(shape()));
  return impl_->data[0];
}

double Tensor::at(int i, int j) const {
  return impl_->data[static_cast<std::size_t>(i) * impl_->shape[1] + j];
}

void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got " + shape_str(loss.shape()));
  }
  Tensor l = loss;
  l.grad()[0] += 1.0;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------

Tensor matmul(Tape& tape, Tensor a, Tensor b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const auto& A = a.data();
  const auto& B = b.data();
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      for (int j = 0; j < n; ++j) out[i * n + j] += av * B[p * n + j];
    }
  Tensor c = Tensor::from_data({m, n}, std::move(out));
  if (a.needs_grad() || b.needs_grad()) {
    c.set_needs_grad(true);
    tape.record([a, b, c, m, k, n]() mutable {
      const auto& G = c.grad();
      if (a.needs_grad()) {
        auto& dA = a.grad();
        const auto& B2 = b.data();
        for (int i = 0; i < m; ++i)
          for (int p = 0; p < k; ++p) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) acc += G[i * n + j] * B2[p * n + j];
            dA[i * k + p] += acc;
          }
      }
      if (b.needs_grad()) {
        auto& dB = b.grad();
        const auto& A2 = a.data();
        for (int p = 0; p < k; ++p)
          for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int i = 0; i < m; ++i) acc += A2[i * k + p] * G[i * n + j];
            dB[p * n + j] += acc;
          }
      }
    });
  }
  return c;
}

Tensor matvec(Tape& tape, Tensor w, Tensor x) {
  if (w.ndim() != 2 || x.ndim() != 1 || w.dim(1) != x.dim(0)) {
    throw ShapeError("matvec: incompatible shapes " + shape_str(w.shape()) + " vs " +
                     shape_str(x.shape()));
  }
  const int r = w.dim(0), k = w.dim(1);
  std::vector<double> out(static_cast<std::size_t>(r), 0.0);
  const auto& W = w.data();
  const auto& X = x.data();
  for (int i = 0; i < r; ++i) {
    double acc = 0.0;
    for (int j = 0; j < k; ++j) acc += W[i * k + j] * X[j];
    out[i] = acc;
  }
  Tensor y = Tensor::from_data({r}, std::move(out));
  if (w.needs_grad() || x.needs_grad()) {
    y.set_needs_grad(true);
    tape.record([w, x, y, r, k]() mutable {
      const auto& G = y.grad();
      if (w.needs_grad()) {
        auto& dW = w.grad();
        const auto& X2 = x.data();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < k; ++j) dW[i * k + j] += G[i] * X2[j];
      }
      if (x.needs_grad()) {
        auto& dX = x.grad();
        const auto& W2 = w.data();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < k; ++j) dX[j] += W2[i * k + j] * G[i];
      }
    });
  }
  return y;
}

Tensor dot(Tape& tape, Tensor a, Tensor b) {
  if (a.ndim() != 1 || b.ndim() != 1 || a.dim(0) != b.dim(0)) {
    throw ShapeError("dot: incompatible shapes " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  double acc = 0.0;
  for (int i = 0; i < a.dim(0); ++i) acc += a.data()[i] * b.data()[i];
  Tensor s = Tensor::scalar(acc);
  if (a.needs_grad() || b.needs_grad()) {
    s.set_needs_grad(true);
    tape.record([a, b, s]() mutable {
      const double g = s.grad()[0];
      const int n = a.dim(0);
      if (a.needs_grad()) {
        auto& dA = a.grad();
        for (int i = 0; i < n; ++i) dA[i] += g * b.data()[i];
      }
      if (b.needs_grad()) {
        auto& dB = b.grad();
        for (int i = 0; i < n; ++i) dB[i] += g * a.data()[i];
      }
    });
  }
  return s;
}

namespace {

// Shared skeleton for binary elementwise ops: da and db receive the output
// gradient already multiplied by the local partial.
template <typename Fwd, typename BwdA, typename BwdB>
Tensor binary_op(Tape& tape, Tensor a, Tensor b, const char* name, Fwd fwd,
                 BwdA bwd_a, BwdB bwd_b) {
  check_same_shape(a, b, name);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
  Tensor c = Tensor::from_data(a.shape(), std::move(out));
  if (a.needs_grad() || b.needs_grad()) {
    c.set_needs_grad(true);
    tape.record([a, b, c, bwd_a, bwd_b]() mutable {
      const auto& G = c.grad();
      if (a.needs_grad()) {
        auto& dA = a.grad();
        for (std::size_t i = 0; i < G.size(); ++i)
          dA[i] += bwd_a(a.data()[i], b.data()[i]) * G[i];
      }
      if (b.needs_grad()) {
        auto& dB = b.grad();
        for (std::size_t i = 0; i < G.size(); ++i)
          dB[i] += bwd_b(a.data()[i], b.data()[i]) * G[i];
      }
    });
  }
  return c;
}

// Unary elementwise op; bwd maps (input, output) to the local derivative.
template <typename Fwd, typename Bwd>
Tensor unary_op(Tape& tape, Tensor x, Fwd fwd, Bwd bwd) {
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.data()[i]);
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  if (x.needs_grad()) {
    y.set_needs_grad(true);
    tape.record([x, y, bwd]() mutable {
      const auto& G = y.grad();
      auto& dX = x.grad();
      for (std::size_t i = 0; i < G.size(); ++i) dX[i] += bwd(x.data()[i], y.data()[i]) * G[i];
    });
  }
  return y;
}

}  // namespace

Tensor add(Tape& tape, Tensor a, Tensor b) {
  return binary_op(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(Tape& tape, Tensor a, Tensor b) {
  return binary_op(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(Tape& tape, Tensor a, Tensor b) {
  return binary_op(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor scale(Tape& tape, Tensor x, double c) {
  return unary_op(
      tape, x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Tensor relu(Tape& tape, Tensor x) {
  // Subgradient at exactly 0 is 0.
  return unary_op(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(Tape& tape, Tensor x) {
  return unary_op(
      tape, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(Tape& tape, Tensor x) {
  return unary_op(
      tape, x,
      [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(Tape& tape, Tensor x) {
  for (double v : x.data()) {
    if (v > 709.0) throw NumericError("exp: overflow for input " + std::to_string(v));
  }
  return unary_op(
      tape, x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(Tape& tape, Tensor x) {
  for (double v : x.data()) {
    if (v <= 0.0) throw NumericError("log: non-positive input " + std::to_string(v));
  }
  return unary_op(
      tape, x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax(Tape& tape, Tensor x) {
  if (x.ndim() != 1) throw ShapeError("softmax: expected 1-D input, got " + shape_str(x.shape()));
  std::vector<bool> valid(static_cast<std::size_t>(x.dim(0)), true);
  return masked_softmax(tape, x, valid);
}

Tensor masked_softmax(Tape& tape, Tensor x, const std::vector<bool>& valid) {
  if (x.ndim() != 1) {
    throw ShapeError("masked_softmax: expected 1-D input, got " + shape_str(x.shape()));
  }
  const int n = x.dim(0);
  if (static_cast<int>(valid.size()) != n) {
    throw ShapeError("masked_softmax: mask length " + std::to_string(valid.size()) +
                     " does not match input " + shape_str(x.shape()));
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i)
    if (valid[i]) mx = std::max(mx, x.data()[i]);
  if (!std::isfinite(mx)) throw ShapeError("masked_softmax: all positions masked");
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  double z = 0.0;
  for (int i = 0; i < n; ++i) {
    if (valid[i]) {
      out[i] = std::exp(x.data()[i] - mx);
      z += out[i];
    }
  }
  for (int i = 0; i < n; ++i) out[i] /= z;
  Tensor y = Tensor::from_data({n}, std::move(out));
  if (x.needs_grad()) {
    y.set_needs_grad(true);
    tape.record([x, y, valid, n]() mutable {
      const auto& G = y.grad();
      auto& dX = x.grad();
      double inner = 0.0;
      for (int i = 0; i < n; ++i)
        if (valid[i]) inner += G[i] * y.data()[i];
      for (int i = 0; i < n; ++i)
        if (valid[i]) dX[i] += y.data()[i] * (G[i] - inner);
    });
  }
  return y;
}

MaxPoolResult max_pool(Tape& tape, Tensor x, const std::vector<int>& axes) {
  const int nd = x.ndim();
  if (axes.empty()) throw ShapeError("max_pool: empty axis set");
  std::vector<bool> reduced(static_cast<std::size_t>(nd), false);
  for (int a : axes) {
    if (a < 0 || a >= nd) {
      throw ShapeError("max_pool: axis " + std::to_string(a) + " invalid for shape " +
                       shape_str(x.shape()));
    }
    reduced[a] = true;
  }
  Shape out_shape;
  for (int i = 0; i < nd; ++i)
    if (!reduced[i]) out_shape.push_back(x.dim(i));
  if (out_shape.empty()) out_shape = {1};

  // Row-major strides of the input and of the kept (non-reduced) axes.
  std::vector<std::int64_t> stride(static_cast<std::size_t>(nd), 1);
  for (int i = nd - 2; i >= 0; --i) stride[i] = stride[i + 1] * x.dim(i + 1);
  const std::int64_t out_n = shape_numel(out_shape);
  std::vector<double> values(static_cast<std::size_t>(out_n),
                             -std::numeric_limits<double>::infinity());
  std::vector<std::int64_t> argmax(static_cast<std::size_t>(out_n), -1);

  const std::int64_t in_n = x.size();
  for (std::int64_t flat = 0; flat < in_n; ++flat) {
    std::int64_t rem = flat, out_idx = 0;
    for (int i = 0; i < nd; ++i) {
      const std::int64_t coord = rem / stride[i];
      rem %= stride[i];
      if (!reduced[i]) out_idx = out_idx * x.dim(i) + coord;
    }
    const double v = x.data()[flat];
    if (v > values[out_idx]) {  // strict: ties keep the lowest flat index
      values[out_idx] = v;
      argmax[out_idx] = flat;
    }
  }

  Tensor y = Tensor::from_data(std::move(out_shape), std::move(values));
  if (x.needs_grad()) {
    y.set_needs_grad(true);
    auto am = argmax;
    tape.record([x, y, am]() mutable {
      const auto& G = y.grad();
      auto& dX = x.grad();
      for (std::size_t o = 0; o < am.size(); ++o) dX[am[o]] += G[o];
    });
  }
  return {y, std::move(argmax)};
}

Tensor concat(Tape& tape, std::vector<Tensor> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no parts");
  const int nd = parts[0].ndim();
  if (axis < 0 || axis >= nd) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " invalid for shape " +
                     shape_str(parts[0].shape()));
  }
  Shape out_shape = parts[0].shape();
  for (std::size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (static_cast<int>(s.size()) != nd) {
      throw ShapeError("concat: rank mismatch " + shape_str(out_shape) + " vs " + shape_str(s));
    }
    for (int i = 0; i < nd; ++i) {
      if (i != axis && s[i] != out_shape[i]) {
        throw ShapeError("concat: shape mismatch off axis " + std::to_string(axis) + ": " +
                         shape_str(parts[0].shape()) + " vs " + shape_str(s));
      }
    }
    out_shape[axis] += s[axis];
  }

  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= out_shape[i];
  for (int i = axis + 1; i < nd; ++i) inner *= out_shape[i];

  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const std::int64_t out_block = out_shape[axis] * inner;
  std::int64_t offset = 0;  // within one outer block, in elements
  std::vector<std::int64_t> part_offsets;
  for (const Tensor& part : parts) {
    part_offsets.push_back(offset);
    const std::int64_t blk = part.dim(axis) * inner;
    for (std::int64_t o = 0; o < outer; ++o) {
      std::copy_n(part.data().begin() + o * blk, blk, out.begin() + o * out_block + offset);
    }
    offset += blk;
  }

  Tensor y = Tensor::from_data(std::move(out_shape), std::move(out));
  bool needs = false;
  for (const Tensor& p : parts) needs = needs || p.needs_grad();
  if (needs) {
    y.set_needs_grad(true);
    tape.record([parts, y, part_offsets, outer, inner, out_block, axis]() mutable {
      const auto& G = y.grad();
      for (std::size_t p = 0; p < parts.size(); ++p) {
        if (!parts[p].needs_grad()) continue;
        auto& dP = parts[p].grad();
        const std::int64_t blk = parts[p].dim(axis) * inner;
        for (std::int64_t o = 0; o < outer; ++o)
          for (std::int64_t i = 0; i < blk; ++i)
            dP[o * blk + i] += G[o * out_block + part_offsets[p] + i];
      }
    });
  }
  return y;
}

Tensor reshape(Tape& tape, Tensor x, Shape shape) {
  if (shape_numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  Tensor y = Tensor::from_data(std::move(shape), x.data());
  if (x.needs_grad()) {
    y.set_needs_grad(true);
    tape.record([x, y]() mutable {
      const auto& G = y.grad();
      auto& dX = x.grad();
      for (std::size_t i = 0; i < G.size(); ++i) dX[i] += G[i];
    });
  }
  return y;
}

Tensor dropout(Tape& tape, Tensor x, double rate, bool train, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;
  const double keep = 1.0 - rate;
  std::vector<std::uint8_t> mask(x.data().size());
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.bernoulli(rate) ? 0 : 1;
    out[i] = mask[i] ? x.data()[i] / keep : 0.0;
  }
  Tensor y = Tensor::from_data(x.shape(), std::move(out));
  if (x.needs_grad()) {
    y.set_needs_grad(true);
    tape.record([x, y, mask, keep]() mutable {
      const auto& G = y.grad();
      auto& dX = x.grad();
      for (std::size_t i = 0; i < G.size(); ++i)
        if (mask[i]) dX[i] += G[i] / keep;
    });
  }
  return y;
}

Tensor sum(Tape& tape, Tensor x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor s = Tensor::scalar(acc);
  if (x.needs_grad()) {
    s.set_needs_grad(true);
    tape.record([x, s]() mutable {
      const double g = s.grad()[0];
      auto& dX = x.grad();
      for (double& d : dX) d += g;
    });
  }
  return s;
}

Tensor mean(Tape& tape, Tensor x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.size()));
}

Tensor pick(Tape& tape, Tensor x, int index) {
  if (x.ndim() != 1 || index < 0 || index >= x.dim(0)) {
    throw ShapeError("pick: index " + std::to_string(index) + " invalid for " +
                     shape_str(x.shape()));
  }
  Tensor s = Tensor::scalar(x.data()[index]);
  if (x.needs_grad()) {
    s.set_needs_grad(true);
    tape.record([x, s, index]() mutable { x.grad()[index] += s.grad()[0]; });
  }
  return s;
}

Tensor stack_rows(Tape& tape, std::vector<Tensor> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const int k = rows[0].dim(0);
  for (const Tensor& r : rows) {
    if (r.ndim() != 1 || r.dim(0) != k) {
      throw ShapeError("stack_rows: expected 1-D rows of length " + std::to_string(k) +
                       ", got " + shape_str(r.shape()));
    }
  }
  const int m = static_cast<int>(rows.size());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m) * k);
  for (const Tensor& r : rows) out.insert(out.end(), r.data().begin(), r.data().end());
  Tensor y = Tensor::from_data({m, k}, std::move(out));
  bool needs = false;
  for (const Tensor& r : rows) needs = needs || r.needs_grad();
  if (needs) {
    y.set_needs_grad(true);
    tape.record([rows, y, k]() mutable {
      const auto& G = y.grad();
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].needs_grad()) continue;
        auto& dR = rows[i].grad();
        for (int j = 0; j < k; ++j) dR[j] += G[i * k + j];
      }
    });
  }
  return y;
}

Tensor stack_scalars(Tape& tape, std::vector<Tensor> xs) {
  if (xs.empty()) throw ShapeError("stack_scalars: no inputs");
  std::vector<double> out;
  out.reserve(xs.size());
  for (const Tensor& x : xs) out.push_back(x.value());
  Tensor y = Tensor::from_data({static_cast<int>(xs.size())}, std::move(out));
  bool needs = false;
  for (const Tensor& x : xs) needs = needs || x.needs_grad();
  if (needs) {
    y.set_needs_grad(true);
    tape.record([xs, y]() mutable {
      const auto& G = y.grad();
      for (std::size_t i = 0; i < xs.size(); ++i)
        if (xs[i].needs_grad()) xs[i].grad()[0] += G[i];
    });
  }
  return y;
}

Tensor scalar_mul(Tape& tape, Tensor v, Tensor s) {
  if (s.size() != 1) throw ShapeError("scalar_mul: scale must be scalar, got " + shape_str(s.shape()));
  const double c = s.data()[0];
  std::vector<double> out(v.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * v.data()[i];
  Tensor y = Tensor::from_data(v.shape(), std::move(out));
  if (v.needs_grad() || s.needs_grad()) {
    y.set_needs_grad(true);
    tape.record([v, s, y]() mutable {
      const auto& G = y.grad();
      if (v.needs_grad()) {
        auto& dV = v.grad();
        const double c2 = s.data()[0];
        for (std::size_t i = 0; i < G.size(); ++i) dV[i] += c2 * G[i];
      }
      if (s.needs_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < G.size(); ++i) acc += v.data()[i] * G[i];
        s.grad()[0] += acc;
      }
    });
  }
  return y;
}

Tensor cross_entropy_with_logits(Tape& tape, Tensor logits, int gold) {
  if (logits.ndim() != 1) {
    throw ShapeError("cross_entropy_with_logits: expected 1-D logits, got " +
                     shape_str(logits.shape()));
  }
  const int n = logits.dim(0);
  if (gold < 0 || gold >= n) {
    throw ShapeError("cross_entropy_with_logits: gold index " + std::to_string(gold) +
                     " out of range for " + shape_str(logits.shape()));
  }
  double mx = *std::max_element(logits.data().begin(), logits.data().end());
  double z = 0.0;
  for (double v : logits.data()) z += std::exp(v - mx);
  const double loss = mx + std::log(z) - logits.data()[gold];
  Tensor out = Tensor::scalar(loss);
  if (logits.needs_grad()) {
    out.set_needs_grad(true);
    tape.record([logits, out, gold, mx, z, n]() mutable {
      const double g = out.grad()[0];
      auto& dL = logits.grad();
      for (int i = 0; i < n; ++i) {
        const double p = std::exp(logits.data()[i] - mx) / z;
        dL[i] += g * (p - (i == gold ? 1.0 : 0.0));
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f,
                           const std::vector<Tensor>& leaves, double step, double tol,
                           double abs_floor) {
  auto eval = [&f]() {
    Tape t;
    return f(t).value();
  };

  const double base = eval();
  if (eval() != base) {
    throw NumericError("grad_check: function is not deterministic (re-evaluation mismatch)");
  }

  for (const Tensor& leaf : leaves) {
    Tensor l = leaf;
    l.zero_grad();
  }
  Tape tape;
  Tensor loss = f(tape);
  if (loss.size() != 1) throw ShapeError("grad_check: function must be scalar-valued");
  tape.backward(loss);

  GradCheckResult res;
  res.pass = true;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor leaf = leaves[li];
    const std::vector<double> analytic = leaf.grad();
    for (std::size_t i = 0; i < leaf.data().size(); ++i) {
      const double saved = leaf.data()[i];
      leaf.data()[i] = saved + step;
      const double fp = eval();
      leaf.data()[i] = saved - step;
      const double fm = eval();
      leaf.data()[i] = saved;
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i];
      const double diff = std::abs(a - numeric);
      // absolute-error floor: differences finite differencing cannot resolve
      // on near-zero gradients do not count against the relative tolerance
      const double rel = diff <= abs_floor ? 0.0 : diff / std::max(std::abs(a), std::abs(numeric));
      if (rel > res.max_rel_error) {
        res.max_rel_error = rel;
        std::ostringstream os;
        os << "leaf " << li << " coord " << i << ": analytic=" << a << " numeric=" << numeric;
        res.worst = os.str();
      }
    }
  }
  res.pass = res.max_rel_error < tol;
  return res;
}

}  // namespace dactx

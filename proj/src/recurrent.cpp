#include "dactx/recurrent.hpp"

namespace dactx {

CellKind cell_kind_from_string(const std::string& s) {
  if (s == "LSTM") return CellKind::kLstm;
  if (s == "GRU") return CellKind::kGru;
  throw ConfigError("unknown cell kind '" + s + "' (expected LSTM or GRU)");
}

std::string to_string(CellKind kind) { return kind == CellKind::kLstm ? "LSTM" : "GRU"; }

namespace {

Tensor gate_bias(int hidden_dim, double value) {
  return Tensor::param({hidden_dim}, std::vector<double>(hidden_dim, value));
}

// affine(x, h) = W x + U h + b
Tensor gate_preact(Tape& tape, Tensor w, Tensor x, Tensor u, Tensor h, Tensor b) {
  return add(tape, add(tape, matvec(tape, w, x), matvec(tape, u, h)), b);
}

}  // namespace

LstmParams make_lstm_params(int input_dim, int hidden_dim, double init_scale,
                            double forget_bias, Rng& rng) {
  if (input_dim < 1 || hidden_dim < 1) throw ConfigError("rnn dims must be >= 1");
  LstmParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  auto w = [&]() { return Tensor::uniform_param({hidden_dim, input_dim}, init_scale, rng); };
  auto u = [&]() { return Tensor::uniform_param({hidden_dim, hidden_dim}, init_scale, rng); };
  p.wi = w(); p.ui = u(); p.bi = gate_bias(hidden_dim, 0.0);
  p.wf = w(); p.uf = u(); p.bf = gate_bias(hidden_dim, forget_bias);
  p.wo = w(); p.uo = u(); p.bo = gate_bias(hidden_dim, 0.0);
  p.wg = w(); p.ug = u(); p.bg = gate_bias(hidden_dim, 0.0);
  return p;
}

GruParams make_gru_params(int input_dim, int hidden_dim, double init_scale, Rng& rng) {
  if (input_dim < 1 || hidden_dim < 1) throw ConfigError("rnn dims must be >= 1");
  GruParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  auto w = [&]() { return Tensor::uniform_param({hidden_dim, input_dim}, init_scale, rng); };
  auto u = [&]() { return Tensor::uniform_param({hidden_dim, hidden_dim}, init_scale, rng); };
  p.wz = w(); p.uz = u(); p.bz = gate_bias(hidden_dim, 0.0);
  p.wr = w(); p.ur = u(); p.br = gate_bias(hidden_dim, 0.0);
  p.wh = w(); p.uh = u(); p.bh = gate_bias(hidden_dim, 0.0);
  return p;
}

HiddenState lstm_step(Tape& tape, Tensor x, const HiddenState& state, const LstmParams& p) {
  if (x.ndim() != 1 || x.dim(0) != p.input_dim) {
    throw ShapeError("lstm_step: input " + shape_str(x.shape()) + " does not match input_dim " +
                     std::to_string(p.input_dim));
  }
  if (state.h.dim(0) != p.hidden_dim || state.c.dim(0) != p.hidden_dim) {
    throw ShapeError("lstm_step: state does not match hidden_dim " +
                     std::to_string(p.hidden_dim));
  }
  Tensor i = sigmoid(tape, gate_preact(tape, p.wi, x, p.ui, state.h, p.bi));
  Tensor f = sigmoid(tape, gate_preact(tape, p.wf, x, p.uf, state.h, p.bf));
  Tensor o = sigmoid(tape, gate_preact(tape, p.wo, x, p.uo, state.h, p.bo));
  Tensor g = tanh(tape, gate_preact(tape, p.wg, x, p.ug, state.h, p.bg));
  Tensor c = add(tape, mul(tape, f, state.c), mul(tape, i, g));
  Tensor h = mul(tape, o, tanh(tape, c));
  return {h, c};
}

HiddenState gru_step(Tape& tape, Tensor x, const HiddenState& state, const GruParams& p) {
  if (x.ndim() != 1 || x.dim(0) != p.input_dim) {
    throw ShapeError("gru_step: input " + shape_str(x.shape()) + " does not match input_dim " +
                     std::to_string(p.input_dim));
  }
  if (state.h.dim(0) != p.hidden_dim) {
    throw ShapeError("gru_step: state does not match hidden_dim " + std::to_string(p.hidden_dim));
  }
  Tensor z = sigmoid(tape, gate_preact(tape, p.wz, x, p.uz, state.h, p.bz));
  Tensor r = sigmoid(tape, gate_preact(tape, p.wr, x, p.ur, state.h, p.br));
  Tensor cand = tanh(tape, gate_preact(tape, p.wh, x, p.uh, mul(tape, r, state.h), p.bh));
  // h' = (1 - z) * h + z * h~
  Tensor keep = sub(tape, Tensor::full({p.hidden_dim}, 1.0), z);
  Tensor h = add(tape, mul(tape, keep, state.h), mul(tape, z, cand));
  return {h, Tensor()};
}

HiddenState RnnCell::initial_state() const {
  const int h = hidden_dim();
  if (kind == CellKind::kLstm) return {Tensor::zeros({h}), Tensor::zeros({h})};
  return {Tensor::zeros({h}), Tensor()};
}

HiddenState RnnCell::step(Tape& tape, Tensor x, const HiddenState& state) const {
  return kind == CellKind::kLstm ? lstm_step(tape, x, state, lstm)
                                 : gru_step(tape, x, state, gru);
}

std::vector<Tensor> RnnCell::trainable() const {
  std::vector<Tensor> out;
  for (const auto& nt : named("")) out.push_back(nt.second);
  return out;
}

std::vector<std::pair<std::string, Tensor*>> RnnCell::slots(const std::string& prefix) {
  if (kind == CellKind::kLstm) {
    return {{prefix + "wi", &lstm.wi}, {prefix + "ui", &lstm.ui}, {prefix + "bi", &lstm.bi},
            {prefix + "wf", &lstm.wf}, {prefix + "uf", &lstm.uf}, {prefix + "bf", &lstm.bf},
            {prefix + "wo", &lstm.wo}, {prefix + "uo", &lstm.uo}, {prefix + "bo", &lstm.bo},
            {prefix + "wg", &lstm.wg}, {prefix + "ug", &lstm.ug}, {prefix + "bg", &lstm.bg}};
  }
  return {{prefix + "wz", &gru.wz}, {prefix + "uz", &gru.uz}, {prefix + "bz", &gru.bz},
          {prefix + "wr", &gru.wr}, {prefix + "ur", &gru.ur}, {prefix + "br", &gru.br},
          {prefix + "wh", &gru.wh}, {prefix + "uh", &gru.uh}, {prefix + "bh", &gru.bh}};
}

std::vector<std::pair<std::string, Tensor>> RnnCell::named(const std::string& prefix) const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (auto& st : const_cast<RnnCell*>(this)->slots(prefix)) out.emplace_back(st.first, *st.second);
  return out;
}

RnnCell make_rnn_cell(CellKind kind, int input_dim, int hidden_dim, double init_scale,
                      double forget_bias, Rng& rng) {
  RnnCell cell;
  cell.kind = kind;
  if (kind == CellKind::kLstm) {
    cell.lstm = make_lstm_params(input_dim, hidden_dim, init_scale, forget_bias, rng);
  } else {
    cell.gru = make_gru_params(input_dim, hidden_dim, init_scale, rng);
  }
  return cell;
}

SequenceResult run_sequence(Tape& tape, const std::vector<Tensor>& xs,
                            const std::vector<bool>& valid, const RnnCell& cell,
                            const HiddenState& h0) {
  if (xs.empty()) throw ShapeError("run_sequence: empty sequence");
  if (xs.size() != valid.size()) {
    throw ShapeError("run_sequence: sequence length " + std::to_string(xs.size()) +
                     " does not match mask length " + std::to_string(valid.size()));
  }
  HiddenState state = h0.h.defined() ? h0 : cell.initial_state();
  SequenceResult result;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    if (valid[t]) {
      state = cell.step(tape, xs[t], state);
      result.outputs.push_back(state.h);
    } else {
      result.outputs.push_back(Tensor::zeros({cell.hidden_dim()}));
    }
  }
  result.last = state;
  return result;
}

}  // namespace dactx

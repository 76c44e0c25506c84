#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dactx/tensor.hpp"

namespace dactx {

enum class CellKind { kLstm, kGru };

CellKind cell_kind_from_string(const std::string& s);  // "LSTM" / "GRU"
std::string to_string(CellKind kind);

// Standard forget-gate LSTM without peepholes.
struct LstmParams {
  int input_dim = 0;
  int hidden_dim = 0;
  Tensor wi, ui, bi;  // input gate: [h x in], [h x h], [h]
  Tensor wf, uf, bf;  // forget gate
  Tensor wo, uo, bo;  // output gate
  Tensor wg, ug, bg;  // candidate
};

// Original GRU: update z, reset r, candidate h~.
struct GruParams {
  int input_dim = 0;
  int hidden_dim = 0;
  Tensor wz, uz, bz;
  Tensor wr, ur, br;
  Tensor wh, uh, bh;
};

struct HiddenState {
  Tensor h;
  Tensor c;  // defined for LSTM only
};

LstmParams make_lstm_params(int input_dim, int hidden_dim, double init_scale,
                            double forget_bias, Rng& rng);
GruParams make_gru_params(int input_dim, int hidden_dim, double init_scale, Rng& rng);

HiddenState lstm_step(Tape& tape, Tensor x, const HiddenState& state, const LstmParams& params);
HiddenState gru_step(Tape& tape, Tensor x, const HiddenState& state, const GruParams& params);

// One configured recurrent cell; exactly one of the parameter sets is live.
struct RnnCell {
  CellKind kind = CellKind::kLstm;
  LstmParams lstm;
  GruParams gru;

  int hidden_dim() const { return kind == CellKind::kLstm ? lstm.hidden_dim : gru.hidden_dim; }
  HiddenState initial_state() const;
  HiddenState step(Tape& tape, Tensor x, const HiddenState& state) const;
  std::vector<Tensor> trainable() const;
  std::vector<std::pair<std::string, Tensor>> named(const std::string& prefix) const;
  std::vector<std::pair<std::string, Tensor*>> slots(const std::string& prefix);
};

RnnCell make_rnn_cell(CellKind kind, int input_dim, int hidden_dim, double init_scale,
                      double forget_bias, Rng& rng);

struct SequenceResult {
  std::vector<Tensor> outputs;  // zero vectors at masked positions
  HiddenState last;             // state after the final valid position
};

// Left-to-right recurrence from h0 (zero state when h0.h is undefined).
// Masked positions copy the state through unchanged.
SequenceResult run_sequence(Tape& tape, const std::vector<Tensor>& xs,
                            const std::vector<bool>& valid, const RnnCell& cell,
                            const HiddenState& h0);

}  // namespace dactx

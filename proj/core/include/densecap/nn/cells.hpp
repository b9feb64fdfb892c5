#pragma once

#include <cstddef>
#include <string>

#include "densecap/nn/ops.hpp"
#include "densecap/nn/param_store.hpp"

namespace densecap {
class Rng;
}

namespace densecap::nn {

// Gate blocks are stacked row-wise in the order (update, reset, candidate):
//   z = s(W_iz x + b_iz + W_hz h + b_hz)
//   r = s(W_ir x + b_ir + W_hr h + b_hr)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
struct GruCell {
  Parameter* w_ih = nullptr;  // [3H, I]
  Parameter* w_hh = nullptr;  // [3H, H]
  Parameter* b_ih = nullptr;  // [3H]
  Parameter* b_hh = nullptr;  // [3H]
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static void declare(ParamStore& store, const std::string& prefix,
                      std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                      Scalar init_range);
  static GruCell bind(ParamStore& store, const std::string& prefix);

  Var step(Var x, Var h) const;
};

struct LstmState {
  Var h;
  Var c;
};

// Gate blocks in the order (input, forget, cell, output):
//   c' = f * c + i * g,  h' = o * tanh(c')
struct LstmCell {
  Parameter* w_ih = nullptr;  // [4H, I]
  Parameter* w_hh = nullptr;  // [4H, H]
  Parameter* bias = nullptr;  // [4H]
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;

  static void declare(ParamStore& store, const std::string& prefix,
                      std::size_t input_dim, std::size_t hidden_dim, Rng& rng,
                      Scalar init_range);
  static LstmCell bind(ParamStore& store, const std::string& prefix);

  LstmState step(Var x, LstmState state) const;
  LstmState zero_state(Tape& tape) const;
};

// Free-function spellings used throughout the pipeline.
inline Var gru_step(const GruCell& cell, Var x, Var h) { return cell.step(x, h); }
inline LstmState lstm_step(const LstmCell& cell, Var x, LstmState s) {
  return cell.step(x, s);
}

}  // namespace densecap::nn

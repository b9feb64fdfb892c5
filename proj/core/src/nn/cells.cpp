#include "densecap/nn/cells.hpp"

#include "densecap/error.hpp"
#include "densecap/rng.hpp"

namespace densecap::nn {

void GruCell::declare(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                      std::size_t hidden_dim, Rng& rng, Scalar init_range) {
  store.add_uniform(prefix + ".w_ih", {3 * hidden_dim, input_dim}, rng, init_range);
  store.add_uniform(prefix + ".w_hh", {3 * hidden_dim, hidden_dim}, rng, init_range);
  store.add_uniform(prefix + ".b_ih", {3 * hidden_dim}, rng, init_range);
  store.add_uniform(prefix + ".b_hh", {3 * hidden_dim}, rng, init_range);
}

GruCell GruCell::bind(ParamStore& store, const std::string& prefix) {
  GruCell c;
  c.w_ih = &store.at(prefix + ".w_ih");
  c.w_hh = &store.at(prefix + ".w_hh");
  c.b_ih = &store.at(prefix + ".b_ih");
  c.b_hh = &store.at(prefix + ".b_hh");
  c.hidden_dim = c.w_hh->value.cols();
  c.input_dim = c.w_ih->value.cols();
  if (c.w_ih->value.rows() != 3 * c.hidden_dim || c.b_ih->value.size() != 3 * c.hidden_dim ||
      c.b_hh->value.size() != 3 * c.hidden_dim) {
    throw ShapeError("GRU cell " + prefix + " has inconsistent parameter shapes");
  }
  return c;
}

Var GruCell::step(Var x, Var h) const {
  if (x.size() != input_dim || h.size() != hidden_dim) {
    throw ShapeError("gru_step: expected x[" + std::to_string(input_dim) + "], h[" +
                     std::to_string(hidden_dim) + "], got " + shape_string(x.shape()) + ", " +
                     shape_string(h.shape()));
  }
  Tape& t = x.tape();
  const std::size_t H = hidden_dim;
  Var gx = linear(t.param(*w_ih), t.param(*b_ih), x);
  Var gh = linear(t.param(*w_hh), t.param(*b_hh), h);
  Var z = sigmoid(slice(gx, 0, H) + slice(gh, 0, H));
  Var r = sigmoid(slice(gx, H, H) + slice(gh, H, H));
  Var n = tanh(slice(gx, 2 * H, H) + r * slice(gh, 2 * H, H));
  return one_minus(z) * n + z * h;
}

void LstmCell::declare(ParamStore& store, const std::string& prefix, std::size_t input_dim,
                       std::size_t hidden_dim, Rng& rng, Scalar init_range) {
  store.add_uniform(prefix + ".w_ih", {4 * hidden_dim, input_dim}, rng, init_range);
  store.add_uniform(prefix + ".w_hh", {4 * hidden_dim, hidden_dim}, rng, init_range);
  store.add_uniform(prefix + ".bias", {4 * hidden_dim}, rng, init_range);
}

LstmCell LstmCell::bind(ParamStore& store, const std::string& prefix) {
  LstmCell c;
  c.w_ih = &store.at(prefix + ".w_ih");
  c.w_hh = &store.at(prefix + ".w_hh");
  c.bias = &store.at(prefix + ".bias");
  c.hidden_dim = c.w_hh->value.cols();
  c.input_dim = c.w_ih->value.cols();
  if (c.w_ih->value.rows() != 4 * c.hidden_dim || c.bias->value.size() != 4 * c.hidden_dim) {
    throw ShapeError("LSTM cell " + prefix + " has inconsistent parameter shapes");
  }
  return c;
}

LstmState LstmCell::step(Var x, LstmState s) const {
  if (x.size() != input_dim || s.h.size() != hidden_dim || s.c.size() != hidden_dim) {
    throw ShapeError("lstm_step: expected x[" + std::to_string(input_dim) + "], h/c[" +
                     std::to_string(hidden_dim) + "], got " + shape_string(x.shape()));
  }
  Tape& t = x.tape();
  const std::size_t H = hidden_dim;
  Var gates = linear(t.param(*w_ih), t.param(*bias), x) + matvec(t.param(*w_hh), s.h);
  Var i = sigmoid(slice(gates, 0, H));
  Var f = sigmoid(slice(gates, H, H));
  Var g = tanh(slice(gates, 2 * H, H));
  Var o = sigmoid(slice(gates, 3 * H, H));
  Var c = f * s.c + i * g;
  return {o * tanh(c), c};
}

LstmState LstmCell::zero_state(Tape& tape) const {
  return {tape.constant(Tensor({hidden_dim})), tape.constant(Tensor({hidden_dim}))};
}

}  // namespace densecap::nn

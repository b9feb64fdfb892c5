#include "densecap/nn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "densecap/error.hpp"

namespace densecap::nn {
namespace {

using RowMajor = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

ConstMatMap as_mat(const Tensor& t) {
  return ConstMatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                     static_cast<Eigen::Index>(t.cols()));
}
MatMap as_mat(Tensor& t) {
  return MatMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                static_cast<Eigen::Index>(t.cols()));
}
ConstVecMap as_vec(const Tensor& t) {
  return ConstVecMap(t.data().data(), static_cast<Eigen::Index>(t.size()));
}
VecMap as_vec(Tensor& t) {
  return VecMap(t.data().data(), static_cast<Eigen::Index>(t.size()));
}

// Gradient sink for a parent, or nullptr when it does not need one.
Tensor* sink(Tape& t, int id) {
  return t.requires_grad(id) ? &t.grad_buffer(id) : nullptr;
}

void require_same_shape(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                     " vs " + shape_string(b.shape()));
  }
}

void require_rank(const char* op, Var v, std::size_t rank) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_string(v.shape()));
  }
}

Scalar stable_sigmoid(Scalar x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (1.0 + e);
}

Scalar softplus(Scalar x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename F, typename D>
Var unary(Var a, F f, D dfdx_from_y_x) {
  Tape& tape = a.tape();
  Tensor y = a.value();
  for (auto& v : y.data()) v = f(v);
  const int ia = a.id();
  return tape.emit(std::move(y), {a}, [ia, dfdx_from_y_x](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& y = t.value(self);
    const Tensor& x = t.value(ia);
    Tensor& ga = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx_from_y_x(y[i], x[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  Tensor y = a.value();
  y += b.value();
  const int ia = a.id(), ib = b.id();
  return a.tape().emit(std::move(y), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (auto* s = sink(t, ia)) *s += g;
    if (auto* s = sink(t, ib)) *s += g;
  });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  Tensor y = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().emit(std::move(y), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (auto* s = sink(t, ia)) *s += g;
    if (auto* s = sink(t, ib)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  Tensor y = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().emit(std::move(y), {a, b}, [ia, ib](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (auto* s = sink(t, ia)) {
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * bv[i];
    }
    if (auto* s = sink(t, ib)) {
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, Scalar k) {
  return unary(a, [k](Scalar x) { return k * x; }, [k](Scalar, Scalar) { return k; });
}

Var neg(Var a) { return scale(a, -1.0); }

Var one_minus(Var a) {
  return unary(a, [](Scalar x) { return 1.0 - x; }, [](Scalar, Scalar) { return -1.0; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](Scalar y, Scalar) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](Scalar x) { return std::tanh(x); },
               [](Scalar y, Scalar) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(a, [](Scalar x) { return std::exp(x); }, [](Scalar y, Scalar) { return y; });
}

Var log(Var a) {
  return unary(a, [](Scalar x) { return std::log(x); },
               [](Scalar, Scalar x) { return 1.0 / x; });
}

Var matvec(Var w, Var x) {
  require_rank("matvec", w, 2);
  require_rank("matvec", x, 1);
  const Tensor& W = w.value();
  if (W.cols() != x.size()) {
    throw ShapeError("matvec: " + shape_string(W.shape()) + " x " + shape_string(x.shape()));
  }
  Tensor y({W.rows()});
  as_vec(y).noalias() = as_mat(W) * as_vec(x.value());
  const int iw = w.id(), ix = x.id();
  return w.tape().emit(std::move(y), {w, x}, [iw, ix](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (auto* s = sink(t, iw)) as_mat(*s).noalias() += as_vec(g) * as_vec(t.value(ix)).transpose();
    if (auto* s = sink(t, ix)) as_vec(*s).noalias() += as_mat(t.value(iw)).transpose() * as_vec(g);
  });
}

Var linear(Var w, Var b, Var x) {
  require_rank("linear", w, 2);
  require_rank("linear", x, 1);
  const Tensor& W = w.value();
  if (W.cols() != x.size() || b.size() != W.rows()) {
    throw ShapeError("linear: W " + shape_string(W.shape()) + ", b " +
                     shape_string(b.shape()) + ", x " + shape_string(x.shape()));
  }
  Tensor y = b.value();
  as_vec(y).noalias() += as_mat(W) * as_vec(x.value());
  const int iw = w.id(), ib = b.id(), ix = x.id();
  return w.tape().emit(std::move(y), {w, b, x}, [iw, ib, ix](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (auto* s = sink(t, iw)) as_mat(*s).noalias() += as_vec(g) * as_vec(t.value(ix)).transpose();
    if (auto* s = sink(t, ib)) *s += g;
    if (auto* s = sink(t, ix)) as_vec(*s).noalias() += as_mat(t.value(iw)).transpose() * as_vec(g);
  });
}

Var matmul_nt(Var a, Var w) {
  require_rank("matmul_nt", a, 2);
  require_rank("matmul_nt", w, 2);
  const Tensor& A = a.value();
  const Tensor& W = w.value();
  if (A.cols() != W.cols()) {
    throw ShapeError("matmul_nt: " + shape_string(A.shape()) + " x " +
                     shape_string(W.shape()) + "^T");
  }
  Tensor y({A.rows(), W.rows()});
  as_mat(y).noalias() = as_mat(A) * as_mat(W).transpose();
  const int ia = a.id(), iw = w.id();
  return a.tape().emit(std::move(y), {a, w}, [ia, iw](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (auto* s = sink(t, ia)) as_mat(*s).noalias() += as_mat(g) * as_mat(t.value(iw));
    if (auto* s = sink(t, iw)) as_mat(*s).noalias() += as_mat(g).transpose() * as_mat(t.value(ia));
  });
}

Var mat_t_vec(Var a, Var v) {
  require_rank("mat_t_vec", a, 2);
  require_rank("mat_t_vec", v, 1);
  const Tensor& A = a.value();
  if (A.rows() != v.size()) {
    throw ShapeError("mat_t_vec: " + shape_string(A.shape()) + "^T x " +
                     shape_string(v.shape()));
  }
  Tensor y({A.cols()});
  as_vec(y).noalias() = as_mat(A).transpose() * as_vec(v.value());
  const int ia = a.id(), iv = v.id();
  return a.tape().emit(std::move(y), {a, v}, [ia, iv](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (auto* s = sink(t, ia)) as_mat(*s).noalias() += as_vec(t.value(iv)) * as_vec(g).transpose();
    if (auto* s = sink(t, iv)) as_vec(*s).noalias() += as_mat(t.value(ia)) * as_vec(g);
  });
}

Var add_rows(Var m, Var v) {
  require_rank("add_rows", m, 2);
  require_rank("add_rows", v, 1);
  const Tensor& M = m.value();
  if (M.cols() != v.size()) {
    throw ShapeError("add_rows: " + shape_string(M.shape()) + " + " + shape_string(v.shape()));
  }
  Tensor y = M;
  as_mat(y).rowwise() += as_vec(v.value()).transpose();
  const int im = m.id(), iv = v.id();
  return m.tape().emit(std::move(y), {m, v}, [im, iv](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    if (auto* s = sink(t, im)) *s += g;
    if (auto* s = sink(t, iv)) as_vec(*s) += as_mat(g).colwise().sum().transpose();
  });
}

Var concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat: empty input");
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_rank("concat", p, 1);
    total += p.size();
  }
  std::vector<Scalar> data;
  data.reserve(total);
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    const auto d = p.value().data();
    data.insert(data.end(), d.begin(), d.end());
    ids.push_back(p.id());
  }
  return parts.front().tape().emit(
      Tensor::vector(std::move(data)), parts, [ids](Tape& t, int self) {
        const Tensor& g = t.grad_of(self);
        std::size_t off = 0;
        for (int id : ids) {
          const std::size_t n = t.value(id).size();
          if (auto* s = sink(t, id)) {
            for (std::size_t i = 0; i < n; ++i) (*s)[i] += g[off + i];
          }
          off += n;
        }
      });
}

Var slice(Var x, std::size_t offset, std::size_t length) {
  require_rank("slice", x, 1);
  if (length == 0 || offset + length > x.size()) {
    throw ShapeError("slice: [" + std::to_string(offset) + ", +" + std::to_string(length) +
                     ") out of range for length " + std::to_string(x.size()));
  }
  const auto d = x.value().data();
  std::vector<Scalar> out(d.begin() + offset, d.begin() + offset + length);
  const int ix = x.id();
  return x.tape().emit(Tensor::vector(std::move(out)), {x},
                       [ix, offset](Tape& t, int self) {
                         const Tensor& g = t.grad_of(self);
                         Tensor& s = t.grad_buffer(ix);
                         for (std::size_t i = 0; i < g.size(); ++i) s[offset + i] += g[i];
                       });
}

Var row(Var m, std::size_t i) {
  require_rank("row", m, 2);
  const Tensor& M = m.value();
  if (i >= M.rows()) {
    throw std::out_of_range("row " + std::to_string(i) + " out of range for " +
                            shape_string(M.shape()));
  }
  const auto r = M.row(i);
  std::vector<Scalar> out(r.begin(), r.end());
  const int im = m.id();
  return m.tape().emit(Tensor::vector(std::move(out)), {m}, [im, i](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    Tensor& s = t.grad_buffer(im);
    const std::size_t c = g.size();
    for (std::size_t k = 0; k < c; ++k) s[i * c + k] += g[k];
  });
}

Var embed(Var table, std::size_t id) {
  require_rank("embed", table, 2);
  if (id >= table.value().rows()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                            std::to_string(table.value().rows()));
  }
  return row(table, id);
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: empty input");
  const std::size_t n = rows.front().size();
  std::vector<Scalar> data;
  data.reserve(rows.size() * n);
  std::vector<int> ids;
  for (const Var& r : rows) {
    require_rank("stack_rows", r, 1);
    if (r.size() != n) throw ShapeError("stack_rows: ragged rows");
    const auto d = r.value().data();
    data.insert(data.end(), d.begin(), d.end());
    ids.push_back(r.id());
  }
  return rows.front().tape().emit(Tensor({rows.size(), n}, std::move(data)), rows,
                                  [ids, n](Tape& t, int self) {
                                    const Tensor& g = t.grad_of(self);
                                    for (std::size_t r = 0; r < ids.size(); ++r) {
                                      if (auto* s = sink(t, ids[r])) {
                                        for (std::size_t k = 0; k < n; ++k) (*s)[k] += g[r * n + k];
                                      }
                                    }
                                  });
}

Var sum(Var x) {
  Scalar acc = 0.0;
  for (auto v : x.value().data()) acc += v;
  const int ix = x.id();
  return x.tape().emit(Tensor::scalar(acc), {x}, [ix](Tape& t, int self) {
    const Scalar g = t.grad_of(self)[0];
    Tensor& s = t.grad_buffer(ix);
    for (auto& v : s.data()) v += g;
  });
}

Var dot(Var a, Var b) {
  require_same_shape("dot", a, b);
  const Scalar y = as_vec(a.value()).dot(as_vec(b.value()));
  const int ia = a.id(), ib = b.id();
  return a.tape().emit(Tensor::scalar(y), {a, b}, [ia, ib](Tape& t, int self) {
    const Scalar g = t.grad_of(self)[0];
    if (auto* s = sink(t, ia)) as_vec(*s) += g * as_vec(t.value(ib));
    if (auto* s = sink(t, ib)) as_vec(*s) += g * as_vec(t.value(ia));
  });
}

Var pick(Var x, std::size_t i) {
  if (i >= x.size()) throw std::out_of_range("pick index out of range");
  const int ix = x.id();
  return x.tape().emit(Tensor::scalar(x.value()[i]), {x}, [ix, i](Tape& t, int self) {
    t.grad_buffer(ix)[i] += t.grad_of(self)[0];
  });
}

Tensor softmax_values(const Tensor& x, std::size_t axis) {
  if (axis != x.rank() - 1) {
    throw std::out_of_range("softmax axis " + std::to_string(axis) +
                            " is not the last axis of shape " + shape_string(x.shape()));
  }
  if (x.rank() > 2) throw ShapeError("softmax supports rank 1 or 2");
  Tensor y = x;
  const std::size_t width = x.shape().back();
  const std::size_t rows = x.size() / width;
  for (std::size_t r = 0; r < rows; ++r) {
    Scalar* p = y.data().data() + r * width;
    const Scalar mx = *std::max_element(p, p + width);
    Scalar z = 0.0;
    for (std::size_t i = 0; i < width; ++i) {
      p[i] = std::exp(p[i] - mx);
      z += p[i];
    }
    for (std::size_t i = 0; i < width; ++i) p[i] /= z;
  }
  return y;
}

Var softmax(Var x) {
  require_rank("softmax", x, 1);
  Tensor y = softmax_values(x.value(), 0);
  const int ix = x.id();
  return x.tape().emit(std::move(y), {x}, [ix](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& y = t.value(self);
    const Scalar gy = as_vec(g).dot(as_vec(y));
    Tensor& s = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) s[i] += y[i] * (g[i] - gy);
  });
}

Var log_softmax(Var x) {
  require_rank("log_softmax", x, 1);
  const Tensor& xv = x.value();
  const Scalar mx = *std::max_element(xv.data().begin(), xv.data().end());
  Scalar z = 0.0;
  for (auto v : xv.data()) z += std::exp(v - mx);
  const Scalar lse = mx + std::log(z);
  Tensor y = xv;
  for (auto& v : y.data()) v -= lse;
  const int ix = x.id();
  return x.tape().emit(std::move(y), {x}, [ix](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& y = t.value(self);
    Scalar gs = 0.0;
    for (auto v : g.data()) gs += v;
    Tensor& s = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) s[i] += g[i] - std::exp(y[i]) * gs;
  });
}

Var log_softmax(Var x, std::span<const unsigned char> allowed) {
  require_rank("log_softmax", x, 1);
  const Tensor& xv = x.value();
  if (allowed.size() != xv.size()) throw ShapeError("log_softmax: mask length mismatch");
  Scalar mx = -std::numeric_limits<Scalar>::infinity();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (allowed[i]) mx = std::max(mx, xv[i]);
  }
  if (!std::isfinite(mx)) throw ContractViolation("log_softmax: mask allows no entries");
  Scalar z = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    if (allowed[i]) z += std::exp(xv[i] - mx);
  }
  const Scalar lse = mx + std::log(z);
  Tensor y = xv;
  std::vector<unsigned char> mask(allowed.begin(), allowed.end());
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = mask[i] ? y[i] - lse : -std::numeric_limits<Scalar>::infinity();
  }
  const int ix = x.id();
  return x.tape().emit(std::move(y), {x}, [ix, mask = std::move(mask)](Tape& t, int self) {
    const Tensor& g = t.grad_of(self);
    const Tensor& y = t.value(self);
    Scalar gs = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (mask[i]) gs += g[i];
    }
    Tensor& s = t.grad_buffer(ix);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (mask[i]) s[i] += g[i] - std::exp(y[i]) * gs;
    }
  });
}

Var bce_with_logits(Var logits, const Tensor& targets, const Tensor& weights) {
  const Tensor& l = logits.value();
  if (targets.size() != l.size() || weights.size() != l.size()) {
    throw ShapeError("bce_with_logits: targets/weights must match logits " +
                     shape_string(l.shape()));
  }
  Scalar acc = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (weights[i] == 0.0) continue;
    acc += weights[i] * (softplus(l[i]) - targets[i] * l[i]);
  }
  const int il = logits.id();
  return logits.tape().emit(Tensor::scalar(acc), {logits},
                            [il, targets, weights](Tape& t, int self) {
                              const Scalar g = t.grad_of(self)[0];
                              const Tensor& l = t.value(il);
                              Tensor& s = t.grad_buffer(il);
                              for (std::size_t i = 0; i < l.size(); ++i) {
                                s[i] += g * weights[i] * (stable_sigmoid(l[i]) - targets[i]);
                              }
                            });
}

Var cross_entropy(Var logits, std::size_t target) {
  require_rank("cross_entropy", logits, 1);
  const Tensor& l = logits.value();
  if (target >= l.size()) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                            " outside vocabulary of size " + std::to_string(l.size()));
  }
  const Scalar mx = *std::max_element(l.data().begin(), l.data().end());
  Scalar z = 0.0;
  for (auto v : l.data()) z += std::exp(v - mx);
  const Scalar lse = mx + std::log(z);
  const int il = logits.id();
  return logits.tape().emit(Tensor::scalar(lse - l[target]), {logits},
                            [il, target, lse](Tape& t, int self) {
                              const Scalar g = t.grad_of(self)[0];
                              const Tensor& l = t.value(il);
                              Tensor& s = t.grad_buffer(il);
                              for (std::size_t i = 0; i < l.size(); ++i) {
                                s[i] += g * std::exp(l[i] - lse);
                              }
                              s[target] -= g;
                            });
}

}  // namespace densecap::nn

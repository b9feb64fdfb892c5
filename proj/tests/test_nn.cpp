#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "densecap/error.hpp"
#include "densecap/nn/adam.hpp"
#include "densecap/nn/cells.hpp"
#include "densecap/nn/checkpoint.hpp"
#include "densecap/nn/ops.hpp"
#include "densecap/nn/param_store.hpp"
#include "densecap/nn/tape.hpp"
#include "densecap/rng.hpp"
#include "support/gradcheck.hpp"
#include "support/oracle.hpp"

using namespace densecap;
using namespace densecap::nn;
using testing_support::check_input_grad;
using testing_support::check_param_grads;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double range = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-range, range);
  return t;
}

}  // namespace

// ------------------------------------------------------------------ tensor

TEST(Tensor, ShapeAndData) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(shape_string(t.shape()), "2x3");
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

// -------------------------------------------------------------------- tape

TEST(Tape, SumGradientIsOnes) {
  Tape tape;
  Var x = tape.input(Tensor::vector({0.3, -2.0, 5.0}));
  tape.backward(sum(x));
  EXPECT_EQ(tape.grad(x), Tensor::vector({1, 1, 1}));
}

TEST(Tape, DotSelfGradientIsTwoX) {
  Tape tape;
  Var x = tape.input(Tensor::vector({2, -1}));
  tape.backward(dot(x, x));
  EXPECT_EQ(tape.grad(x), Tensor::vector({4, -2}));
}

TEST(Tape, NonScalarLossIsContractViolation) {
  Tape tape;
  Var x = tape.input(Tensor::vector({1, 2}));
  EXPECT_THROW(tape.backward(x + x), ContractViolation);
}

TEST(Tape, BackwardTwiceAndInferenceModeRejected) {
  Tape tape;
  Var x = tape.input(Tensor::vector({1, 2}));
  Var l = sum(x);
  tape.backward(l);
  EXPECT_THROW(tape.backward(l), ContractViolation);
  Tape inf(Tape::Mode::kInference);
  Var y = inf.input(Tensor::vector({1}));
  EXPECT_THROW(inf.backward(sum(y)), ContractViolation);
}

TEST(Tape, GradientsAccumulateAcrossBackwardPasses) {
  ParamStore store;
  store.add("w", Tensor::vector({1.0, 2.0}));
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    tape.backward(sum(tape.param(store.at("w"))));
  }
  EXPECT_EQ(store.at("w").grad, Tensor::vector({2.0, 2.0}));
  store.zero_grad();
  EXPECT_EQ(store.at("w").grad, Tensor::vector({0.0, 0.0}));
}

// --------------------------------------------------------------------- ops

TEST(Ops, SoftmaxSymmetricAndFrozenValues) {
  Tape tape(Tape::Mode::kInference);
  const Tensor u = softmax(tape.constant(Tensor::vector({0, 0, 0}))).value();
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
  // 30-digit evaluation of exp(x_i) / Σ exp(x_j) for x = (1, 2, 3).
  const Tensor s = softmax(tape.constant(Tensor::vector({1, 2, 3}))).value();
  EXPECT_NEAR(s[0], 0.090030573170380457998, 1e-15);
  EXPECT_NEAR(s[1], 0.24472847105479765247, 1e-15);
  EXPECT_NEAR(s[2], 0.66524095577482188953, 1e-15);
}

TEST(Ops, SoftmaxValuesAxis) {
  const Tensor m = Tensor::matrix(2, 3, {1, 2, 3, -5, 0, 5});
  const Tensor s = softmax_values(m, 1);
  for (std::size_t r = 0; r < 2; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < 3; ++c) total += s.at(r, c);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
  EXPECT_THROW(softmax_values(m, 2), std::out_of_range);
}

TEST(Ops, SigmoidTanhBasics) {
  Tape tape(Tape::Mode::kInference);
  EXPECT_EQ(sigmoid(tape.constant(Tensor::vector({0.0}))).item(), 0.5);
  // sigmoid(0.7) to 20 digits.
  EXPECT_NEAR(sigmoid(tape.constant(Tensor::vector({0.7}))).item(), 0.66818777216816609668, 1e-15);
  const Tensor big = sigmoid(tape.constant(Tensor::vector({-800, 800}))).value();
  EXPECT_TRUE(std::isfinite(big[0]) && std::isfinite(big[1]));
  EXPECT_GE(big[0], 0.0);
  EXPECT_LE(big[1], 1.0);
}

TEST(Ops, EmbedOutOfVocabularyThrows) {
  Tape tape;
  Var table = tape.constant(Tensor({4, 2}, 1.0));
  EXPECT_NO_THROW(embed(table, 3));
  EXPECT_THROW(embed(table, 4), std::out_of_range);
}

TEST(Ops, ShapeMismatchesThrow) {
  Tape tape;
  Var a = tape.constant(Tensor::vector({1, 2}));
  Var b = tape.constant(Tensor::vector({1, 2, 3}));
  EXPECT_THROW(a + b, ShapeError);
  EXPECT_THROW(matvec(tape.constant(Tensor({3, 3})), a), ShapeError);
}

TEST(Ops, LogSoftmaxMaskExcludesEntries) {
  Tape tape(Tape::Mode::kInference);
  const std::vector<unsigned char> allowed{0, 1, 1};
  const Tensor y = log_softmax(tape.constant(Tensor::vector({5.0, 0.0, 0.0})), allowed).value();
  EXPECT_TRUE(std::isinf(y[0]) && y[0] < 0);
  EXPECT_NEAR(y[1], std::log(0.5), 1e-15);
  EXPECT_NEAR(y[2], std::log(0.5), 1e-15);
}

// Finite-difference checks on every differentiable primitive.
TEST(OpsGradient, EveryPrimitiveMatchesFiniteDifferences) {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const Tensor x = random_tensor({n}, rng);
    const Tensor w = random_tensor({m, n}, rng);
    const Tensor b = random_tensor({m}, rng);
    const Tensor c = random_tensor({n}, rng);
    const Tensor pos = [&] {
      Tensor p = random_tensor({n}, rng);
      for (auto& v : p.data()) v = std::abs(v) + 0.5;
      return p;
    }();
    const Tensor mat = random_tensor({m, n}, rng);
    Tensor targets({n});
    for (auto& v : targets.data()) v = rng.uniform();
    const Tensor weights = random_tensor({n}, rng);
    const std::size_t pick_i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(n) - 1));

    using F = std::function<Var(Tape&, Var)>;
    const std::vector<std::pair<const char*, F>> cases = {
        {"add", [&](Tape& t, Var v) { return dot(v + t.constant(c), t.constant(c)); }},
        {"sub", [&](Tape& t, Var v) { return dot(v - t.constant(c), v); }},
        {"mul", [&](Tape& t, Var v) { return sum(mul(v, v)); }},
        {"scale", [&](Tape& t, Var v) { return sum(scale(mul(v, v), -1.7)); }},
        {"neg", [&](Tape& t, Var v) { return dot(neg(v), t.constant(c)); }},
        {"one_minus", [&](Tape& t, Var v) { return dot(one_minus(v), v); }},
        {"sigmoid", [&](Tape& t, Var v) { return dot(sigmoid(v), t.constant(c)); }},
        {"tanh", [&](Tape& t, Var v) { return dot(tanh(v), t.constant(c)); }},
        {"exp", [&](Tape& t, Var v) { return dot(exp(v), t.constant(c)); }},
        {"log", [&](Tape& t, Var v) { return sum(log(v)); }},
        {"matvec", [&](Tape& t, Var v) { return sum(tanh(matvec(t.constant(w), v))); }},
        {"linear", [&](Tape& t, Var v) { return sum(tanh(linear(t.constant(w), t.constant(b), v))); }},
        {"concat_slice", [&](Tape& t, Var v) { return dot(slice(concat({v, tanh(v)}), 1, n), slice(concat({v, v}), 0, n)); }},
        {"softmax", [&](Tape& t, Var v) { return dot(softmax(v), t.constant(c)); }},
        {"log_softmax", [&](Tape& t, Var v) { return dot(log_softmax(v), t.constant(c)); }},
        {"pick", [&](Tape& t, Var v) { return pick(tanh(v), pick_i); }},
        {"cross_entropy", [&](Tape& t, Var v) { return cross_entropy(v, pick_i); }},
        {"bce", [&](Tape& t, Var v) { return bce_with_logits(v, targets, weights); }},
        {"mat_t_vec", [&](Tape& t, Var v) { return sum(tanh(mat_t_vec(t.constant(w), tanh(matvec(t.constant(w), v))))); }},
        {"stack_rows_matmul_nt", [&](Tape& t, Var v) {
           Var rows = stack_rows({v, tanh(v)});
           return sum(tanh(matmul_nt(rows, t.constant(mat))));
         }},
        {"add_rows_row", [&](Tape& t, Var v) {
           Var rows = stack_rows({v, mul(v, v), t.constant(c)});
           return sum(tanh(row(add_rows(rows, v), 1)));
         }},
    };
    for (const auto& [name, f] : cases) {
      const Tensor input = std::string(name) == "log" ? pos : x;
      const auto r = check_input_grad(input, f);
      EXPECT_LT(r.max_rel_err, 1e-4) << name << " seed " << seed << " at " << r.worst;
    }
    // Gradient with respect to matrix operands.
    const auto rw = check_input_grad(w, [&](Tape& t, Var W) { return sum(tanh(matvec(W, t.constant(x)))); });
    EXPECT_LT(rw.max_rel_err, 1e-4) << "matvec W seed " << seed;
    const auto rm = check_input_grad(mat, [&](Tape& t, Var M) {
      return sum(tanh(matmul_nt(stack_rows({t.constant(x), t.constant(c)}), M)));
    });
    EXPECT_LT(rm.max_rel_err, 1e-4) << "matmul_nt W seed " << seed;
    const auto re = check_input_grad(w, [&](Tape& t, Var table) { return sum(tanh(embed(table, m - 1))); });
    EXPECT_LT(re.max_rel_err, 1e-4) << "embed seed " << seed;
  }
}

TEST(OpsGradient, MaskedLogSoftmax) {
  const std::vector<unsigned char> allowed{0, 1, 1, 0, 1};
  const Tensor x = Tensor::vector({0.3, -0.2, 1.1, 0.5, -0.7});
  const auto r = check_input_grad(x, [&](Tape&, Var v) { return pick(log_softmax(v, allowed), 2); });
  EXPECT_LT(r.max_rel_err, 1e-4);
}

// ------------------------------------------------------------------- cells

TEST(Cells, ZeroGruAndLstmGiveZero) {
  ParamStore store;
  Rng rng(1);
  GruCell::declare(store, "g", 3, 4, rng, 0.0);
  LstmCell::declare(store, "l", 3, 4, rng, 0.0);
  const GruCell g = GruCell::bind(store, "g");
  const LstmCell l = LstmCell::bind(store, "l");
  Tape tape(Tape::Mode::kInference);
  Var x = tape.constant(Tensor::vector({1, -2, 3}));
  EXPECT_EQ(g.step(x, tape.constant(Tensor({4}))).value(), Tensor({4}));
  const auto s = l.step(x, l.zero_state(tape));
  EXPECT_EQ(s.h.value(), Tensor({4}));
  EXPECT_EQ(s.c.value(), Tensor({4}));
}

TEST(Cells, ShapeMismatchThrows) {
  ParamStore store;
  Rng rng(1);
  GruCell::declare(store, "g", 3, 4, rng, 0.1);
  const GruCell g = GruCell::bind(store, "g");
  Tape tape;
  EXPECT_THROW(g.step(tape.constant(Tensor({2})), tape.constant(Tensor({4}))), ShapeError);
  EXPECT_THROW(g.step(tape.constant(Tensor({3})), tape.constant(Tensor({5}))), ShapeError);
}

TEST(Cells, GruAndLstmMatchScalarOracle) {
  for (int seed = 0; seed < 10; ++seed) {
    ParamStore store;
    Rng rng(100 + seed);
    GruCell::declare(store, "g", 4, 4, rng, 0.5);
    LstmCell::declare(store, "l", 4, 4, rng, 0.5);
    const Tensor x = random_tensor({4}, rng), h = random_tensor({4}, rng), c = random_tensor({4}, rng);
    Tape tape(Tape::Mode::kInference);
    const Tensor gh = GruCell::bind(store, "g").step(tape.constant(x), tape.constant(h)).value();
    const auto og = oracle::gru(store, "g", oracle::from(x), oracle::from(h));
    const auto ls = LstmCell::bind(store, "l").step(tape.constant(x), {tape.constant(h), tape.constant(c)});
    const auto [oh, oc] = oracle::lstm(store, "l", oracle::from(x), oracle::from(h), oracle::from(c));
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(gh[i], static_cast<double>(og[i]), 1e-14);
      EXPECT_NEAR(ls.h.value()[i], static_cast<double>(oh[i]), 1e-14);
      EXPECT_NEAR(ls.c.value()[i], static_cast<double>(oc[i]), 1e-14);
    }
  }
}

TEST(Cells, GradientChecks) {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(200 + seed);
    const auto in = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto hid = static_cast<std::size_t>(rng.uniform_int(1, 8));
    ParamStore gs, ls;
    GruCell::declare(gs, "g", in, hid, rng, 0.5);
    LstmCell::declare(ls, "l", in, hid, rng, 0.5);
    const Tensor x = random_tensor({in}, rng), h = random_tensor({hid}, rng), c = random_tensor({hid}, rng);
    const GruCell g = GruCell::bind(gs, "g");
    const LstmCell l = LstmCell::bind(ls, "l");
    auto rg = check_param_grads(gs, [&](Tape& t) { return sum(g.step(t.constant(x), t.constant(h))); });
    EXPECT_LT(rg.max_rel_err, 1e-4) << "gru seed " << seed << " " << rg.worst;
    auto rl = check_param_grads(ls, [&](Tape& t) {
      auto s = l.step(t.constant(x), {t.constant(h), t.constant(c)});
      return sum(s.h) + sum(scale(s.c, 0.5));
    });
    EXPECT_LT(rl.max_rel_err, 1e-4) << "lstm seed " << seed << " " << rl.worst;
  }
}

TEST(Cells, TwoLayerGruUnrollBceGradient) {
  ParamStore store;
  Rng rng(5);
  GruCell::declare(store, "a", 3, 4, rng, 0.5);
  GruCell::declare(store, "b", 4, 4, rng, 0.5);
  store.add_uniform("out", {2, 4}, rng, 0.5);
  std::vector<Tensor> xs;
  for (int t = 0; t < 5; ++t) xs.push_back(random_tensor({3}, rng));
  const GruCell a = GruCell::bind(store, "a"), b = GruCell::bind(store, "b");
  const Tensor targets = Tensor::vector({1.0, 0.0}), ones({2}, 1.0);
  const auto r = check_param_grads(store, [&](Tape& t) {
    Var h1 = t.constant(Tensor({4})), h2 = t.constant(Tensor({4}));
    std::vector<Var> terms;
    for (const auto& x : xs) {
      h1 = a.step(t.constant(x), h1);
      h2 = b.step(h1, h2);
      terms.push_back(bce_with_logits(matvec(t.param(store.at("out")), h2), targets, ones));
    }
    return sum(concat(terms));
  });
  EXPECT_LT(r.max_rel_err, 1e-4) << r.worst;
}

// Unrolled cell steps versus the same arithmetic spelled out op by op.
TEST(Cells, UnrolledEqualsFlatGraph) {
  ParamStore s1;
  Rng rng(9);
  GruCell::declare(s1, "g", 2, 3, rng, 0.5);
  ParamStore s2 = s1;
  const GruCell g = GruCell::bind(s1, "g");
  std::vector<Tensor> xs{Tensor::vector({0.1, -0.4}), Tensor::vector({0.9, 0.2}), Tensor::vector({-0.3, 0.5})};
  {
    Tape t;
    Var h = t.constant(Tensor({3}));
    for (const auto& x : xs) h = g.step(t.constant(x), h);
    t.backward(sum(h));
  }
  {
    Tape t;
    Var wi = t.param(s2.at("g.w_ih")), wh = t.param(s2.at("g.w_hh"));
    Var bi = t.param(s2.at("g.b_ih")), bh = t.param(s2.at("g.b_hh"));
    Var h = t.constant(Tensor({3}));
    for (const auto& x : xs) {
      Var gi = linear(wi, bi, t.constant(x));
      Var gh = linear(wh, bh, h);
      Var z = sigmoid(slice(gi, 0, 3) + slice(gh, 0, 3));
      Var r = sigmoid(slice(gi, 3, 3) + slice(gh, 3, 3));
      Var n = tanh(slice(gi, 6, 3) + mul(r, slice(gh, 6, 3)));
      h = mul(one_minus(z), n) + mul(z, h);
    }
    t.backward(sum(h));
  }
  for (const auto& [name, p] : s1) {
    const Tensor& other = s2.at(name).grad;
    for (std::size_t i = 0; i < p.grad.size(); ++i) EXPECT_NEAR(p.grad[i], other[i], 1e-14) << name;
  }
}

// -------------------------------------------------------------------- adam

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore store;
  store.add("p", Tensor::vector({0.0}));
  store.at("p").grad = Tensor::vector({1.0});
  store.at("p").has_grad = true;
  Adam adam({0.1, 0.9, 0.999, 1e-8});
  EXPECT_EQ(adam.step(store), StepStatus::kApplied);
  // m̂ = 1, v̂ = 1  =>  Δ = -0.1 / (1 + 1e-8)
  EXPECT_NEAR(store.at("p").value[0], -0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, NoBackwardIsNoOp) {
  ParamStore store;
  store.add("p", Tensor::vector({3.0}));
  Adam adam;
  EXPECT_EQ(adam.step(store), StepStatus::kNoGradients);
  EXPECT_EQ(store.at("p").value[0], 3.0);
}

TEST(Adam, ZeroGradLeavesParameter) {
  ParamStore store;
  store.add("p", Tensor::vector({3.0}));
  store.at("p").grad = Tensor::vector({0.0});
  store.at("p").has_grad = true;
  Adam adam;
  adam.step(store);
  EXPECT_EQ(store.at("p").value[0], 3.0);
}

TEST(Adam, TwoStepsMatchScalarReference) {
  const double lr = 0.05, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.3;
  ParamStore store;
  store.add("p", Tensor::vector({1.0}));
  Adam adam({lr, b1, b2, eps});
  double p = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    store.at("p").grad = Tensor::vector({g});
    store.at("p").has_grad = true;
    adam.step(store);
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    p -= lr * (m / (1 - std::pow(b1, t))) / (std::sqrt(v / (1 - std::pow(b2, t))) + eps);
  }
  EXPECT_NEAR(store.at("p").value[0], p, 1e-15);
}

TEST(Adam, DeterministicGivenIdenticalState) {
  auto run = [] {
    ParamStore store;
    Rng rng(3);
    store.add_uniform("w", {3, 3}, rng, 1.0);
    Adam adam;
    for (int i = 0; i < 5; ++i) {
      store.zero_grad();
      Tape t;
      Var w = t.param(store.at("w"));
      t.backward(sum(tanh(matvec(w, t.constant(Tensor::vector({1, 2, 3}))))));
      adam.step(store);
    }
    return store;
  };
  EXPECT_TRUE(run().same_values(run()));
}

// ------------------------------------------------------------ param store

TEST(ParamStore, LexicographicOrderAndUniqueNames) {
  ParamStore store;
  store.add("b", Tensor::vector({1}));
  store.add("a", Tensor::vector({2}));
  store.add("c.x", Tensor::vector({3}));
  std::vector<std::string> names;
  for (const auto& [k, v] : store) names.push_back(k);
  EXPECT_EQ(names, (std::vector<std::string>{"a", "b", "c.x"}));
  EXPECT_THROW(store.add("a", Tensor::vector({1})), ContractViolation);
}

TEST(ParamStore, ClipGradNorm) {
  ParamStore store;
  store.add("a", Tensor::vector({0, 0}));
  store.at("a").grad = Tensor::vector({3, 4});
  store.at("a").has_grad = true;
  EXPECT_DOUBLE_EQ(global_grad_norm(store), 5.0);
  clip_grad_norm(store, 1.0);
  EXPECT_NEAR(store.at("a").grad[0], 0.6, 1e-15);
  EXPECT_NEAR(store.at("a").grad[1], 0.8, 1e-15);
}

// -------------------------------------------------------------- checkpoint

TEST(Checkpoint, RoundTripIsBitExact) {
  Checkpoint ckpt;
  Rng rng(11);
  ckpt.params.add_uniform("z.w", {3, 5}, rng, 1.0);
  ckpt.params.add("a.b", Tensor::vector({-0.0, 1e-300, std::nextafter(1.0, 2.0), -123.456}));
  ckpt.meta["stage"] = "epn";
  ckpt.meta["config"] = "{\"a\": 1, \"b\": [1, 2]}";
  const std::string bytes = serialize_checkpoint(ckpt);
  const Checkpoint back = parse_checkpoint(bytes);
  EXPECT_EQ(back.meta, ckpt.meta);
  EXPECT_TRUE(back.params.same_values(ckpt.params));
  EXPECT_EQ(serialize_checkpoint(back), bytes);
  EXPECT_TRUE(std::signbit(back.params.at("a.b").value[0]));
}

TEST(Checkpoint, TruncatedOrForeignInputRejected) {
  Checkpoint ckpt;
  ckpt.params.add("w", Tensor::vector({1, 2, 3}));
  const std::string bytes = serialize_checkpoint(ckpt);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 4)), ParseError);
  EXPECT_THROW(parse_checkpoint("not a checkpoint\n"), ParseError);
}

TEST(Checkpoint, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "densecap_ckpt_test";
  std::filesystem::remove_all(dir);
  Checkpoint ckpt;
  Rng rng(12);
  ckpt.params.add_uniform("w", {4, 4}, rng, 1.0);
  write_checkpoint(dir / "x.ckpt", ckpt);
  EXPECT_TRUE(read_checkpoint(dir / "x.ckpt").params.same_values(ckpt.params));
  std::filesystem::remove_all(dir);
}

// --------------------------------------------------------------------- rng

TEST(Rng, DerivedStreamsAreReproducibleAndDistinct) {
  Rng a(7, "purpose", 1), b(7, "purpose", 1), c(7, "purpose", 2), d(7, "other", 1);
  const auto x = a.next();
  EXPECT_EQ(x, b.next());
  EXPECT_NE(x, c.next());
  EXPECT_NE(x, d.next());
}

TEST(Rng, UniformIntInclusiveAndNormalMoments) {
  Rng rng(1);
  std::vector<int> seen(4, 0);
  for (int i = 0; i < 4000; ++i) ++seen[static_cast<std::size_t>(rng.uniform_int(0, 3))];
  for (int s : seen) EXPECT_GT(s, 800);
  double m = 0, m2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    m += z;
    m2 += z * z;
  }
  EXPECT_NEAR(m / n, 0.0, 0.01);
  EXPECT_NEAR(m2 / n, 1.0, 0.02);
}

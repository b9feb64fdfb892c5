// Micro-benchmarks for the inner loops that dominate training and inference.

#include <benchmark/benchmark.h>

#include "densecap/epn.hpp"
#include "densecap/metrics.hpp"
#include "densecap/nn/cells.hpp"
#include "densecap/nn/ops.hpp"
#include "densecap/rng.hpp"
#include "densecap/scn.hpp"

using namespace densecap;
using nn::Tape;
using nn::Tensor;

namespace {

Tensor random_tensor(nn::Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

void BM_Matvec(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  nn::ParamStore store;
  auto& w = store.add_uniform("w", {n, n}, rng, 0.1);
  const Tensor x = random_tensor({n}, rng);
  for (auto _ : state) {
    Tape tape(Tape::Mode::kInference);
    benchmark::DoNotOptimize(nn::matvec(tape.param(w), tape.constant(x)).value().data());
  }
}
BENCHMARK(BM_Matvec)->Arg(32)->Arg(64)->Arg(128);

void BM_GruStep(benchmark::State& state) {
  const bool backward = state.range(0) != 0;
  Rng rng(2);
  nn::ParamStore store;
  nn::GruCell::declare(store, "g", 16, 32, rng, 0.08);
  const auto cell = nn::GruCell::bind(store, "g");
  const Tensor x = random_tensor({16}, rng), h = random_tensor({32}, rng);
  for (auto _ : state) {
    Tape tape(backward ? Tape::Mode::kRecord : Tape::Mode::kInference);
    const auto out = nn::sum(cell.step(tape.constant(x), tape.constant(h)));
    if (backward) tape.backward(out);
    benchmark::DoNotOptimize(out.item());
  }
}
BENCHMARK(BM_GruStep)->Arg(0)->Arg(1)->ArgNames({"backward"});

void BM_EpnScore(benchmark::State& state) {
  Rng rng(3);
  EpnConfig cfg;
  nn::ParamStore store;
  epn::EpnModel::declare(store, cfg, 16, rng);
  const epn::EpnModel model(store, cfg);
  const Tensor segments = random_tensor({40, 16}, rng);
  for (auto _ : state) {
    const auto scores = epn::score_proposals(model, segments);
    benchmark::DoNotOptimize(epn::extract_candidates(scores, cfg.top_n, cfg.nms_threshold, cfg.max_candidates));
  }
}
BENCHMARK(BM_EpnScore);

void BM_Nms(benchmark::State& state) {
  Rng rng(4);
  std::vector<epn::Proposal> ps(static_cast<std::size_t>(state.range(0)));
  for (auto& p : ps) {
    const int s = rng.uniform_int(0, 39);
    p.interval = {s, std::min(39, s + rng.uniform_int(0, 7))};
    p.score = rng.uniform();
  }
  for (auto _ : state) benchmark::DoNotOptimize(epn::nms(ps, 0.8, 32));
}
BENCHMARK(BM_Nms)->Arg(50)->Arg(200);

void BM_ScnDecode(benchmark::State& state) {
  const auto mode = state.range(0) == 0 ? scn::DecodeMode::kGreedy : scn::DecodeMode::kSample;
  Rng rng(5);
  ScnConfig cfg;
  nn::ParamStore store;
  scn::ScnModel::declare(store, cfg, 16, 64, 40, rng);
  const scn::ScnModel model(store, cfg);
  const std::vector<scn::EventContext> events{{random_tensor({6, 16}, rng), random_tensor({64}, rng)},
                                              {random_tensor({4, 16}, rng), random_tensor({64}, rng)},
                                              {random_tensor({8, 16}, rng), random_tensor({64}, rng)}};
  scn::SequenceOptions opt;
  opt.mode = mode;
  for (auto _ : state) benchmark::DoNotOptimize(scn::caption_tokens(model, events, opt, &rng));
}
BENCHMARK(BM_ScnDecode)->Arg(0)->Arg(1)->ArgNames({"sample"});

void BM_Cider(benchmark::State& state) {
  Rng rng(6);
  const auto caption = [&] {
    metrics::Tokens t;
    for (int n = rng.uniform_int(4, 9); n > 0; --n) t.push_back(rng.uniform_int(3, 40));
    return t;
  };
  std::vector<metrics::Tokens> docs;
  for (int i = 0; i < 1000; ++i) docs.push_back(caption());
  const metrics::CiderScorer scorer(docs);
  const auto c = caption();
  const std::vector<metrics::Tokens> refs{caption(), caption()};
  for (auto _ : state) benchmark::DoNotOptimize(scorer.score(c, refs));
}
BENCHMARK(BM_Cider);

}  // namespace

BENCHMARK_MAIN();

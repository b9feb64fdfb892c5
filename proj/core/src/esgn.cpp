#include "densecap/esgn.hpp"

#include <algorithm>
#include <cmath>

#include "densecap/error.hpp"
#include "densecap/nn/ops.hpp"
#include "densecap/rng.hpp"

namespace densecap::esgn {

using nn::Tape;
using nn::Tensor;
using nn::Var;

Tensor location_mask(Interval interval, int num_segments, int loc_dim) {
  if (num_segments < 1 || loc_dim < 1) throw std::invalid_argument("location_mask: bad extents");
  if (!interval.well_formed() || interval.end >= num_segments) {
    throw std::invalid_argument("location_mask: interval outside [0, T_c)");
  }
  // Rounding done in integers so half-way cases do not depend on float error.
  const long t = num_segments, l = loc_dim;
  const auto round_div = [](long num, long den) {  // round half up, den > 0
    const long q = 2 * num + den, d = 2 * den;
    return static_cast<int>(q >= 0 ? q / d : -((-q + d - 1) / d));
  };
  const int count = std::clamp(round_div(l * interval.length(), t), 1, loc_dim);
  // centre (bins) = (start + end + 1) * L / (2T); first = round(centre - count / 2)
  const long twice = (interval.start + interval.end + 1) * l - count * t;
  const int first = std::clamp(round_div(twice, 2 * t), 0, loc_dim - count);
  Tensor mask({static_cast<std::size_t>(loc_dim)});
  for (int i = first; i < first + count; ++i) mask[static_cast<std::size_t>(i)] = 1.0;
  return mask;
}

Tensor pointer_embedding(const epn::Proposal& p, int num_segments, int loc_dim) {
  Tensor loc = location_mask(p.interval, num_segments, loc_dim);
  std::vector<double> u(loc.data().begin(), loc.data().end());
  u.insert(u.end(), p.vis.data().begin(), p.vis.data().end());
  return Tensor::vector(std::move(u));
}

void EsgnModel::declare(nn::ParamStore& store, const EsgnConfig& cfg, std::size_t vis_dim, Rng& rng) {
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto a = static_cast<std::size_t>(cfg.attn_dim);
  const auto u = static_cast<std::size_t>(cfg.loc_dim) + vis_dim;
  const double r = cfg.init_range;
  nn::GruCell::declare(store, "esgn.enc", vis_dim, h, rng, r);
  nn::LstmCell::declare(store, "esgn.ptr", u, h, rng, r);
  store.add_uniform("esgn.att.w_embed", {a, u}, rng, r);
  store.add_uniform("esgn.att.w_hidden", {a, h}, rng, r);
  store.add_uniform("esgn.att.b", {a}, rng, r);
  store.add_uniform("esgn.att.v", {a}, rng, r);
  store.add_uniform("esgn.att.b_out", {1}, rng, r);
  store.add_uniform("esgn.end", {u}, rng, r);
  store.add_uniform("esgn.start", {u}, rng, r);
}

EsgnModel::EsgnModel(nn::ParamStore& store, const EsgnConfig& cfg)
    : cfg_(cfg),
      encoder_(nn::GruCell::bind(store, "esgn.enc")),
      pointer_(nn::LstmCell::bind(store, "esgn.ptr")),
      w_embed_(&store.at("esgn.att.w_embed")),
      w_hidden_(&store.at("esgn.att.w_hidden")),
      b_att_(&store.at("esgn.att.b")),
      v_att_(&store.at("esgn.att.v")),
      b_out_(&store.at("esgn.att.b_out")),
      end_(&store.at("esgn.end")),
      start_(&store.at("esgn.start")) {
  if (encoder_.hidden_dim != pointer_.hidden_dim) {
    throw ShapeError("ESGN encoder and pointer hidden widths must match");
  }
  if (pointer_.input_dim != static_cast<std::size_t>(cfg.loc_dim) + encoder_.input_dim) {
    throw ShapeError("ESGN pointer input width must equal loc_dim + vis_dim");
  }
}

EsgnModel::Context EsgnModel::make_context(Tape& tape, const std::vector<epn::Proposal>& candidates,
                                           int num_segments) const {
  Context ctx;
  std::vector<Var> rows{tape.param(*end_)};
  for (const auto& p : candidates) {
    if (p.vis.size() != vis_dim()) {
      throw ShapeError("ESGN: candidate Vis width " + std::to_string(p.vis.size()) +
                       " != " + std::to_string(vis_dim()));
    }
    ctx.embeddings.push_back(pointer_embedding(p, num_segments, cfg_.loc_dim));
    rows.push_back(tape.constant(ctx.embeddings.back()));
  }
  ctx.projected = nn::matmul_nt(nn::stack_rows(rows), tape.param(*w_embed_));
  ctx.ones = tape.constant(Tensor({rows.size(), 1}, 1.0));
  return ctx;
}

Var EsgnModel::encode_candidates(Tape& tape, const std::vector<epn::Proposal>& candidates) const {
  if (candidates.empty()) {
    throw ContractViolation("encode_candidates: empty candidate set; emit an empty sequence instead");
  }
  Var h = tape.constant(Tensor({encoder_.hidden_dim}));
  for (const auto& p : candidates) h = encoder_.step(tape.constant(p.vis), h);
  return h;
}

nn::LstmState EsgnModel::initial_state(Tape& tape, Var h0) const {
  return {h0, tape.constant(Tensor({pointer_.hidden_dim}))};
}

nn::LstmState EsgnModel::pointer_step(Var input, nn::LstmState state) const {
  return pointer_.step(input, state);
}

Var EsgnModel::start_input(Tape& tape) const { return tape.param(*start_); }
Var EsgnModel::end_embedding(Tape& tape) const { return tape.param(*end_); }

Var EsgnModel::attention_logits(const Context& ctx, Var h) const {
  Tape& tape = h.tape();
  Var q = nn::linear(tape.param(*w_hidden_), tape.param(*b_att_), h);
  Var scores = nn::matvec(nn::tanh(nn::add_rows(ctx.projected, q)), tape.param(*v_att_));
  return scores + nn::matvec(ctx.ones, tape.param(*b_out_));
}

Tensor attention_scores(const EsgnModel& model, const Tensor& h,
                        const std::vector<epn::Proposal>& candidates, int num_segments) {
  Tape tape(Tape::Mode::kInference);
  const auto ctx = model.make_context(tape, candidates, num_segments);
  Tensor a = model.attention_logits(ctx, tape.constant(h)).value();
  for (auto& v : a.data()) v = 1.0 / (1.0 + std::exp(-v));
  return a;
}

namespace {

EventSequence run_selector(const EsgnModel& model, const std::vector<epn::Proposal>& candidates, int num_segments,
                           const std::function<std::size_t(const Tensor&, const std::vector<bool>&)>& choose) {
  EventSequence seq;
  if (candidates.empty()) {
    seq.terminated = true;
    return seq;
  }
  Tape tape(Tape::Mode::kInference);
  const auto ctx = model.make_context(tape, candidates, num_segments);
  auto state = model.initial_state(tape, model.encode_candidates(tape, candidates));
  Var input = model.start_input(tape);
  std::vector<bool> used(candidates.size(), false);
  const auto cap = std::min<std::size_t>(candidates.size(),
                                         static_cast<std::size_t>(std::max(0, model.config().max_events)));
  while (seq.size() < cap) {
    state = model.pointer_step(input, state);
    const std::size_t best = choose(model.attention_logits(ctx, state.h).value(), used);
    if (best == 0) {
      seq.terminated = true;
      return seq;
    }
    used[best - 1] = true;
    seq.events.push_back(candidates[best - 1]);
    seq.candidate_index.push_back(static_cast<int>(best - 1));
    input = tape.constant(ctx.embeddings[best - 1]);
  }
  return seq;
}

}  // namespace

EventSequence select_sequence(const EsgnModel& model, const std::vector<epn::Proposal>& candidates,
                              int num_segments, const SelectOptions& options) {
  return run_selector(model, candidates, num_segments, [&](const Tensor& logits, const std::vector<bool>& used) {
    auto key = [&](std::size_t j) {
      return options.logit_transform ? options.logit_transform(logits[j]) : logits[j];
    };
    std::size_t best = 0;
    double best_key = key(0);
    for (std::size_t j = 1; j < logits.size(); ++j) {
      if (used[j - 1]) continue;
      const double k = key(j);
      if (k > best_key) {
        best = j;
        best_key = k;
      }
    }
    return best;
  });
}

EventSequence sample_sequence(const EsgnModel& model, const std::vector<epn::Proposal>& candidates,
                              int num_segments, Rng& rng) {
  return run_selector(model, candidates, num_segments, [&](const Tensor& logits, const std::vector<bool>& used) {
    double peak = logits[0];
    for (std::size_t j = 1; j < logits.size(); ++j) {
      if (!used[j - 1]) peak = std::max(peak, logits[j]);
    }
    std::vector<double> w(logits.size(), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < logits.size(); ++j) {
      if (j > 0 && used[j - 1]) continue;
      w[j] = std::exp(logits[j] - peak);
      total += w[j];
    }
    double u = rng.uniform() * total;
    std::size_t last = 0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (w[j] == 0.0) continue;
      last = j;
      if (u < w[j]) return j;
      u -= w[j];
    }
    return last;
  });
}

std::size_t best_match(const std::vector<epn::Proposal>& candidates, Interval event) {
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t m = 0; m < candidates.size(); ++m) {
    const double v = tiou(candidates[m].interval, event);
    if (v > best_iou) {
      best_iou = v;
      best = m;
    }
  }
  return best;
}

Var esgn_loss(Tape& tape, const EsgnModel& model, const std::vector<epn::Proposal>& candidates,
              const std::vector<Interval>& gt_events, int num_segments) {
  if (candidates.empty()) throw ContractViolation("esgn_loss: empty candidate set");
  std::vector<Interval> order = gt_events;
  std::stable_sort(order.begin(), order.end());
  const auto ctx = model.make_context(tape, candidates, num_segments);
  auto state = model.initial_state(tape, model.encode_candidates(tape, candidates));
  Var input = model.start_input(tape);
  const std::size_t m = candidates.size();
  const Tensor ones({m + 1}, 1.0);
  std::vector<Var> terms;
  for (std::size_t n = 0; n <= order.size(); ++n) {
    state = model.pointer_step(input, state);
    Tensor target({m + 1});
    if (n < order.size()) {
      for (std::size_t j = 0; j < m; ++j) target[j + 1] = tiou(candidates[j].interval, order[n]);
    } else {
      target[0] = 1.0;
    }
    terms.push_back(nn::bce_with_logits(model.attention_logits(ctx, state.h), target, ones));
    if (n < order.size()) input = tape.constant(ctx.embeddings[best_match(candidates, order[n])]);
  }
  return nn::sum(nn::concat(terms));
}

}  // namespace densecap::esgn

#include "densecap/scn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "densecap/error.hpp"
#include "densecap/nn/ops.hpp"
#include "densecap/rng.hpp"

namespace densecap::scn {

using nn::Tape;
using nn::Tensor;
using nn::Var;

EventContext make_context(const Tensor& segments, Interval interval, Tensor vis) {
  if (segments.rank() != 2) throw ShapeError("make_context: segments must be [T_c, D]");
  if (!interval.well_formed() || static_cast<std::size_t>(interval.end) >= segments.rows()) {
    throw std::invalid_argument("make_context: interval outside the video");
  }
  const auto s = static_cast<std::size_t>(interval.length());
  const std::size_t d = segments.cols();
  std::vector<double> rows;
  rows.reserve(s * d);
  for (int t = interval.start; t <= interval.end; ++t) {
    auto r = segments.row(static_cast<std::size_t>(t));
    rows.insert(rows.end(), r.begin(), r.end());
  }
  return {Tensor({s, d}, std::move(rows)), std::move(vis)};
}

void ScnModel::declare(nn::ParamStore& store, const ScnConfig& cfg, std::size_t feat_dim,
                       std::size_t vis_dim, std::size_t vocab_size, Rng& rng) {
  const auto h = static_cast<std::size_t>(cfg.hidden);
  const auto e = static_cast<std::size_t>(cfg.embed_dim);
  const auto a = static_cast<std::size_t>(cfg.attn_dim);
  const auto g = static_cast<std::size_t>(cfg.gate_dim);
  const double r = cfg.init_range;
  nn::LstmCell::declare(store, "scn.episode", vis_dim + h, h, rng, r);
  nn::LstmCell::declare(store, "scn.event", 2 * g + e, h, rng, r);
  store.add_uniform("scn.wemb", {vocab_size, e}, rng, r);
  store.add_uniform("scn.out.w", {vocab_size, h}, rng, r);
  store.add_zeros("scn.out.b", {vocab_size});
  store.add_uniform("scn.tda.w_alpha", {a}, rng, r);
  store.add_uniform("scn.tda.w_c", {a, feat_dim}, rng, r);
  store.add_uniform("scn.tda.w_v", {a, vis_dim}, rng, r);
  store.add_uniform("scn.tda.w_h", {a, h}, rng, r);
  store.add_uniform("scn.cg.w_z", {g, feat_dim}, rng, r);
  store.add_uniform("scn.cg.w_vbar", {g, vis_dim}, rng, r);
  store.add_uniform("scn.cg.w_k", {g, 2 * g + e + h}, rng, r);
}

ScnModel::ScnModel(nn::ParamStore& store, const ScnConfig& cfg)
    : cfg_(cfg),
      episode_(nn::LstmCell::bind(store, "scn.episode")),
      event_(nn::LstmCell::bind(store, "scn.event")),
      wemb_(&store.at("scn.wemb")),
      w_p_(&store.at("scn.out.w")),
      b_p_(&store.at("scn.out.b")),
      w_alpha_(&store.at("scn.tda.w_alpha")),
      w_c_(&store.at("scn.tda.w_c")),
      w_v_(&store.at("scn.tda.w_v")),
      w_h_(&store.at("scn.tda.w_h")),
      w_z_(&store.at("scn.cg.w_z")),
      w_vbar_(&store.at("scn.cg.w_vbar")),
      w_k_(&store.at("scn.cg.w_k")) {
  vocab_size_ = wemb_->value.rows();
  embed_dim_ = wemb_->value.cols();
  feat_dim_ = w_c_->value.cols();
  vis_dim_ = w_v_->value.cols();
  gate_dim_ = w_z_->value.rows();
  const std::size_t h = episode_.hidden_dim;
  if (event_.hidden_dim != h) throw ShapeError("SCN episode and event hidden widths must match");
  if (episode_.input_dim != vis_dim_ + h) throw ShapeError("SCN episode input must be vis + hidden");
  if (event_.input_dim != 2 * gate_dim_ + embed_dim_) throw ShapeError("SCN event input must be 2G + E");
  if (w_p_->value.rows() != vocab_size_ || w_p_->value.cols() != h || b_p_->value.size() != vocab_size_) {
    throw ShapeError("SCN output projection does not match vocabulary/hidden");
  }
  if (w_k_->value.cols() != 2 * gate_dim_ + embed_dim_ + h) throw ShapeError("SCN gate W_k width");
}

ScnModel::Prepared ScnModel::prepare(Tape& tape, const EventContext& ctx) const {
  if (ctx.seg_feats.rank() != 2 || ctx.seg_feats.cols() != feat_dim_) {
    throw ShapeError("SCN: segment features must be [S, " + std::to_string(feat_dim_) + "]");
  }
  if (ctx.vis.size() != vis_dim_) {
    throw ShapeError("SCN: Vis width " + std::to_string(ctx.vis.size()) + " != " + std::to_string(vis_dim_));
  }
  Prepared ev;
  ev.seg = tape.constant(ctx.seg_feats);
  Var vis = tape.constant(ctx.vis);
  ev.seg_proj = nn::matmul_nt(ev.seg, tape.param(*w_c_));
  ev.vis_proj = nn::matvec(tape.param(*w_v_), vis);
  ev.vis_gate = nn::tanh(nn::matvec(tape.param(*w_vbar_), vis));
  return ev;
}

ScnModel::Attention ScnModel::attend(const Prepared& ev, Var h_prev) const {
  Tape& tape = h_prev.tape();
  Var q = ev.vis_proj + nn::matvec(tape.param(*w_h_), h_prev);
  Var alpha = nn::matvec(nn::tanh(nn::add_rows(ev.seg_proj, q)), tape.param(*w_alpha_));
  Var weights = nn::softmax(alpha);
  return {nn::mat_t_vec(ev.seg, weights), weights};
}

ScnModel::Gate ScnModel::gate(Var z, Var vis_gate, Var x, Var h_prev) const {
  Tape& tape = z.tape();
  Var z_bar = nn::tanh(nn::matvec(tape.param(*w_z_), z));
  Var k = nn::sigmoid(nn::matvec(tape.param(*w_k_), nn::concat({z_bar, vis_gate, x, h_prev})));
  Var o = nn::concat({nn::mul(nn::one_minus(k), z_bar), nn::mul(k, vis_gate)});
  return {o, k};
}

nn::LstmState ScnModel::episode_step(Var vis, Var g_prev, nn::LstmState state) const {
  return episode_.step(nn::concat({vis, g_prev}), state);
}

Var ScnModel::embedding(Tape& tape, std::size_t token) const {
  return nn::embed(tape.param(*wemb_), token);
}

ScnModel::WordStep ScnModel::word_step(const Prepared& ev, std::size_t prev_token,
                                       nn::LstmState state) const {
  Tape& tape = state.h.tape();
  Var x = embedding(tape, prev_token);
  const auto att = attend(ev, state.h);
  const auto gt = gate(att.z, ev.vis_gate, x, state.h);
  WordStep out;
  out.state = event_.step(nn::concat({gt.o, x}), state);
  out.logits = nn::linear(tape.param(*w_p_), tape.param(*b_p_), out.state.h);
  return out;
}

ScnModel::Attention tda_attend(const ScnModel& model, Tape& tape, const EventContext& ctx, Var h_prev) {
  return model.attend(model.prepare(tape, ctx), h_prev);
}

ScnModel::Gate context_gate(const ScnModel& model, Var z, const Tensor& vis, Var x, Var h_prev) {
  Tape& tape = z.tape();
  EventContext ctx{Tensor({1, model.feat_dim()}), vis};
  return model.gate(z, model.prepare(tape, ctx).vis_gate, x, h_prev);
}

namespace {

std::vector<unsigned char> emittable_mask(std::size_t vocab) {
  std::vector<unsigned char> allowed(vocab, 1);
  allowed[synth::kPad] = 0;
  allowed[synth::kBos] = 0;
  return allowed;
}

Var step_log_probs(Var logits, double temperature, std::span<const unsigned char> allowed) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  Var scaled = temperature == 1.0 ? logits : nn::scale(logits, 1.0 / temperature);
  return nn::log_softmax(scaled, allowed);
}

}  // namespace

Decoded decode_caption(const ScnModel& model, Tape& tape, const EventContext& ctx, Var r,
                       DecodeMode mode, int max_len, double temperature, Rng* rng) {
  if (max_len < 1) throw std::invalid_argument("decode_caption: max_len must be >= 1");
  if (mode == DecodeMode::kSample && rng == nullptr) {
    throw std::invalid_argument("decode_caption: sampling needs an Rng");
  }
  const auto allowed = emittable_mask(model.vocab_size());
  const auto ev = model.prepare(tape, ctx);
  nn::LstmState state{r, tape.constant(Tensor({model.hidden_dim()}))};
  std::size_t prev = synth::kBos;
  Decoded out;
  std::vector<Var> picked;
  for (int t = 0; t < max_len; ++t) {
    const auto step = model.word_step(ev, prev, state);
    state = step.state;
    Var logp = step_log_probs(step.logits, temperature, allowed);
    const Tensor lp = logp.value();  // copy: pick() below grows the tape
    std::size_t token = 0;
    if (mode == DecodeMode::kGreedy) {
      double best = -INFINITY;
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (allowed[v] && lp[v] > best) {
          best = lp[v];
          token = v;
        }
      }
    } else {
      const double u = rng->uniform();
      double acc = 0.0;
      token = synth::kEos;
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (!allowed[v]) continue;
        token = v;
        acc += std::exp(lp[v]);
        if (u < acc) break;
      }
    }
    picked.push_back(nn::pick(logp, token));
    out.logprob_value += lp[token];
    out.tokens.push_back(static_cast<int>(token));
    prev = token;
    if (token == synth::kEos) break;
  }
  out.g = state.h;
  out.logprob = nn::sum(nn::concat(picked));
  return out;
}

double caption_logprob(const ScnModel& model, const EventContext& ctx, const Tensor& r,
                       const synth::CaptionTokens& tokens, double temperature) {
  Tape tape(Tape::Mode::kInference);
  const auto allowed = emittable_mask(model.vocab_size());
  const auto ev = model.prepare(tape, ctx);
  nn::LstmState state{tape.constant(r), tape.constant(Tensor({model.hidden_dim()}))};
  std::size_t prev = synth::kBos;
  double total = 0.0;
  for (int tok : tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= model.vocab_size()) {
      throw std::out_of_range("caption_logprob: token id " + std::to_string(tok) + " outside vocabulary");
    }
    const auto step = model.word_step(ev, prev, state);
    state = step.state;
    total += step_log_probs(step.logits, temperature, allowed).value()[static_cast<std::size_t>(tok)];
    prev = static_cast<std::size_t>(tok);
    if (tok == synth::kEos) break;
  }
  return total;
}

std::vector<Decoded> caption_sequence(const ScnModel& model, Tape& tape,
                                      const std::vector<EventContext>& events,
                                      const SequenceOptions& options, Rng* rng) {
  std::vector<Decoded> out;
  out.reserve(events.size());
  const Tensor zeros({model.hidden_dim()});
  nn::LstmState episode{tape.constant(zeros), tape.constant(zeros)};
  Var g = tape.constant(zeros);
  for (const auto& ctx : events) {
    if (options.independent) {
      episode = {tape.constant(zeros), tape.constant(zeros)};
      g = tape.constant(zeros);
    }
    episode = model.episode_step(tape.constant(ctx.vis), g, episode);
    out.push_back(decode_caption(model, tape, ctx, episode.h, options.mode, model.config().max_len,
                                 options.temperature, rng));
    g = out.back().g;
  }
  return out;
}

std::vector<synth::CaptionTokens> caption_tokens(const ScnModel& model, const std::vector<EventContext>& events,
                                                 const SequenceOptions& options, Rng* rng) {
  Tape tape(Tape::Mode::kInference);
  std::vector<synth::CaptionTokens> out;
  for (auto& d : caption_sequence(model, tape, events, options, rng)) out.push_back(std::move(d.tokens));
  return out;
}

std::size_t scored_length(const synth::CaptionTokens& caption) {
  auto eos = std::find(caption.begin(), caption.end(), synth::kEos);
  return eos == caption.end() ? caption.size() : static_cast<std::size_t>(eos - caption.begin()) + 1;
}

Var scn_nll(Tape& tape, const ScnModel& model, const std::vector<EventContext>& events,
            const std::vector<synth::CaptionTokens>& captions) {
  if (events.size() != captions.size()) {
    throw std::invalid_argument("scn_nll: " + std::to_string(events.size()) + " events but " +
                                std::to_string(captions.size()) + " captions");
  }
  const Tensor zeros({model.hidden_dim()});
  nn::LstmState episode{tape.constant(zeros), tape.constant(zeros)};
  Var g = tape.constant(zeros);
  std::vector<Var> terms;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& caption = captions[i];
    const std::size_t n = scored_length(caption);
    for (std::size_t t = 0; t < n; ++t) {
      if (caption[t] < 0 || static_cast<std::size_t>(caption[t]) >= model.vocab_size()) {
        throw std::out_of_range("scn_nll: token id " + std::to_string(caption[t]) + " outside vocabulary of " +
                                std::to_string(model.vocab_size()));
      }
    }
    episode = model.episode_step(tape.constant(events[i].vis), g, episode);
    const auto ev = model.prepare(tape, events[i]);
    nn::LstmState state{episode.h, tape.constant(zeros)};
    std::size_t prev = synth::kBos;
    for (std::size_t t = 0; t < n; ++t) {
      const auto step = model.word_step(ev, prev, state);
      state = step.state;
      const auto tok = static_cast<std::size_t>(caption[t]);
      terms.push_back(nn::cross_entropy(step.logits, tok));
      prev = tok;
    }
    g = state.h;
  }
  if (terms.empty()) return tape.constant(Tensor::scalar(0.0));
  return nn::sum(nn::concat(terms));
}

}  // namespace densecap::scn

#include "densecap/epn.hpp"

#include <algorithm>
#include <cmath>

#include "densecap/error.hpp"
#include "densecap/nn/ops.hpp"
#include "densecap/rng.hpp"

namespace densecap::epn {

using nn::Tape;
using nn::Tensor;
using nn::Var;

void EpnModel::declare(nn::ParamStore& store, const EpnConfig& cfg, std::size_t feat_dim, Rng& rng) {
  const auto h = static_cast<std::size_t>(cfg.hidden);
  nn::GruCell::declare(store, "epn.gru1", feat_dim, h, rng, cfg.init_range);
  nn::GruCell::declare(store, "epn.gru2", h, h, rng, cfg.init_range);
  store.add_uniform("epn.out.w", {static_cast<std::size_t>(cfg.K), h}, rng, cfg.init_range);
  store.add_uniform("epn.out.b", {static_cast<std::size_t>(cfg.K)}, rng, cfg.init_range);
}

EpnModel::EpnModel(nn::ParamStore& store, const EpnConfig& cfg)
    : cfg_(cfg),
      layer1_(nn::GruCell::bind(store, "epn.gru1")),
      layer2_(nn::GruCell::bind(store, "epn.gru2")),
      w_out_(&store.at("epn.out.w")),
      b_out_(&store.at("epn.out.b")) {
  if (layer1_.hidden_dim != static_cast<std::size_t>(cfg.hidden) ||
      w_out_->value.rows() != static_cast<std::size_t>(cfg.K)) {
    throw ShapeError("EPN parameters do not match config (hidden/K)");
  }
}

EpnModel::Unroll EpnModel::unroll(Tape& tape, const Tensor& segments) const {
  if (segments.rank() != 2 || segments.cols() != feat_dim()) {
    throw ShapeError("EPN expects segment features of width " + std::to_string(feat_dim()) +
                     ", got " + nn::shape_string(segments.shape()));
  }
  const std::size_t t_c = segments.rows();
  Unroll out;
  out.logits.reserve(t_c);
  out.hidden.reserve(t_c);
  Var h1 = tape.constant(Tensor({layer1_.hidden_dim}));
  Var h2 = tape.constant(Tensor({layer2_.hidden_dim}));
  Var w = tape.param(*w_out_);
  Var b = tape.param(*b_out_);
  for (std::size_t t = 0; t < t_c; ++t) {
    const auto r = segments.row(t);
    Var x = tape.constant(Tensor::vector({r.begin(), r.end()}));
    h1 = layer1_.step(x, h1);
    h2 = layer2_.step(h1, h2);
    out.hidden.push_back(h2);
    out.logits.push_back(nn::linear(w, b, h2));
  }
  return out;
}

ProposalScores score_proposals(const EpnModel& model, const synth::SyntheticVideo& video) {
  return score_proposals(model, video.segments);
}

ProposalScores score_proposals(const EpnModel& model, const Tensor& segments) {
  Tape tape(Tape::Mode::kInference);
  const auto un = model.unroll(tape, segments);
  const std::size_t t_c = segments.rows();
  const std::size_t k_max = model.K();
  const std::size_t h = un.hidden.front().size();
  ProposalScores s;
  s.confidence = Tensor({t_c, k_max});
  s.hidden = Tensor({t_c, h});
  s.valid.assign(t_c * k_max, 0);
  for (std::size_t t = 0; t < t_c; ++t) {
    const Tensor& l = un.logits[t].value();
    for (std::size_t k = 0; k < k_max; ++k) {
      s.confidence.at(t, k) = 1.0 / (1.0 + std::exp(-l[k]));
      s.valid[t * k_max + k] = k <= t ? 1 : 0;
    }
    const Tensor& hv = un.hidden[t].value();
    for (std::size_t j = 0; j < h; ++j) s.hidden.at(t, j) = hv[j];
  }
  return s;
}

std::size_t ProposalLabels::positives() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

std::size_t ProposalLabels::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 1));
}

ProposalLabels label_proposals(const synth::SyntheticVideo& video, int K) {
  ProposalLabels lab;
  lab.num_segments = video.num_segments();
  lab.K = K;
  const auto n = static_cast<std::size_t>(lab.num_segments) * K;
  lab.y.assign(n, 0);
  lab.valid.assign(n, 0);
  for (int t = 0; t < lab.num_segments; ++t) {
    for (int k = 0; k < K; ++k) {
      const auto idx = static_cast<std::size_t>(t) * K + k;
      if (t - k < 0) continue;
      lab.valid[idx] = 1;
      const Interval p = proposal_interval(t, k);
      for (const auto& ev : video.events) {
        if (tiou(p, ev.interval) > 0.5) {
          lab.y[idx] = 1;
          break;
        }
      }
    }
  }
  return lab;
}

double positive_weight(const ProposalLabels& labels) {
  const auto pos = labels.positives();
  if (pos == 0) return 1.0;
  const auto neg = labels.valid_count() - pos;
  return std::clamp(static_cast<double>(neg) / static_cast<double>(pos), 1.0, 100.0);
}

Var epn_loss_from_logits(Var logits, const ProposalLabels& labels) {
  const std::size_t n = labels.y.size();
  if (logits.size() != n) throw ShapeError("epn_loss: logits/labels size mismatch");
  const double wpos = positive_weight(labels);
  Tensor targets({n}), weights({n});
  for (std::size_t i = 0; i < n; ++i) {
    targets[i] = labels.y[i];
    weights[i] = labels.valid[i] ? (labels.y[i] ? wpos : 1.0) : 0.0;
  }
  return nn::bce_with_logits(logits, targets, weights);
}

Var epn_loss(Tape& tape, const EpnModel& model, const synth::SyntheticVideo& video) {
  const auto un = model.unroll(tape, video.segments);
  return epn_loss_from_logits(nn::concat(un.logits),
                              label_proposals(video, static_cast<int>(model.K())));
}

Tensor proposal_vis(const Tensor& hidden, Interval interval) {
  const std::size_t h = hidden.cols();
  if (!interval.well_formed() || static_cast<std::size_t>(interval.end) >= hidden.rows()) {
    throw std::out_of_range("proposal_vis: interval outside the scanned video");
  }
  std::vector<double> v;
  v.reserve(2 * h);
  const auto a = hidden.row(static_cast<std::size_t>(interval.start));
  const auto b = hidden.row(static_cast<std::size_t>(interval.end));
  v.insert(v.end(), a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  return Tensor::vector(std::move(v));
}

bool proposal_rank_less(const Proposal& a, const Proposal& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.interval.start != b.interval.start) return a.interval.start < b.interval.start;
  return a.interval.length() < b.interval.length();
}

std::vector<Proposal> nms(std::vector<Proposal> proposals, double threshold, std::size_t max_keep) {
  std::stable_sort(proposals.begin(), proposals.end(), proposal_rank_less);
  std::vector<Proposal> kept;
  for (auto& p : proposals) {
    if (kept.size() >= max_keep) break;
    bool suppressed = false;
    for (const auto& k : kept) {
      if (tiou(p.interval, k.interval) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(std::move(p));
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const Proposal& a, const Proposal& b) { return a.interval < b.interval; });
  return kept;
}

std::vector<Proposal> extract_candidates(const ProposalScores& scores, int top_n,
                                         double nms_threshold, int max_candidates) {
  std::vector<Proposal> all;
  const int t_c = scores.num_segments();
  for (int t = 0; t < t_c; ++t) {
    for (int k = 0; k < scores.K(); ++k) {
      if (!scores.is_valid(t, k)) continue;
      Proposal p;
      p.interval = proposal_interval(t, k);
      p.score = scores.confidence.at(static_cast<std::size_t>(t), static_cast<std::size_t>(k));
      all.push_back(std::move(p));
    }
  }
  std::stable_sort(all.begin(), all.end(), proposal_rank_less);
  if (top_n >= 0 && all.size() > static_cast<std::size_t>(top_n)) all.resize(top_n);
  auto kept = nms(std::move(all), nms_threshold, static_cast<std::size_t>(std::max(0, max_candidates)));
  for (auto& p : kept) p.vis = proposal_vis(scores.hidden, p.interval);
  return kept;
}

std::vector<Proposal> extract_candidates(const EpnModel& model, const synth::SyntheticVideo& video) {
  const auto& c = model.config();
  return extract_candidates(score_proposals(model, video), c.top_n, c.nms_threshold, c.max_candidates);
}

}  // namespace densecap::epn

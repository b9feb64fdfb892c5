#pragma once

#include <cstddef>
#include <vector>

#include "densecap/interval.hpp"
#include "densecap/model_config.hpp"
#include "densecap/nn/cells.hpp"
#include "densecap/nn/param_store.hpp"
#include "densecap/nn/tape.hpp"
#include "densecap/synth/corpus.hpp"

namespace densecap {
class Rng;
}

// Single-stream proposal scoring: a two-layer GRU scans the segment features
// and, at each ending segment t, emits K logits for the proposals
// [t - k, t], k = 0..K-1.
namespace densecap::epn {

struct Proposal {
  Interval interval;
  double score = 0.0;
  nn::Tensor vis;  // concat(top-layer hidden at start, at end)

  bool operator==(const Proposal&) const = default;
};

// Proposal ending at `t` with output slot `k` covers [t - k, t].
inline Interval proposal_interval(int t, int k) { return {t - k, t}; }

class EpnModel {
 public:
  static void declare(nn::ParamStore& store, const EpnConfig& cfg, std::size_t feat_dim, Rng& rng);
  EpnModel(nn::ParamStore& store, const EpnConfig& cfg);

  struct Unroll {
    std::vector<nn::Var> logits;  // per segment, [K]
    std::vector<nn::Var> hidden;  // per segment, top layer [H]
  };
  // Throws ShapeError if the feature width does not match the parameters.
  Unroll unroll(nn::Tape& tape, const nn::Tensor& segments) const;

  const EpnConfig& config() const noexcept { return cfg_; }
  std::size_t feat_dim() const noexcept { return layer1_.input_dim; }
  std::size_t K() const noexcept { return static_cast<std::size_t>(cfg_.K); }

 private:
  EpnConfig cfg_;
  nn::GruCell layer1_;
  nn::GruCell layer2_;
  nn::Parameter* w_out_;
  nn::Parameter* b_out_;
};

struct ProposalScores {
  nn::Tensor confidence;              // [T_c, K], sigmoid of logits
  nn::Tensor hidden;                  // [T_c, H]
  std::vector<unsigned char> valid;   // [T_c * K]; 0 where start < 0

  int num_segments() const { return static_cast<int>(confidence.rows()); }
  int K() const { return static_cast<int>(confidence.cols()); }
  bool is_valid(int t, int k) const { return valid[static_cast<std::size_t>(t) * K() + k] != 0; }
};

ProposalScores score_proposals(const EpnModel& model, const synth::SyntheticVideo& video);
ProposalScores score_proposals(const EpnModel& model, const nn::Tensor& segments);

struct ProposalLabels {
  int num_segments = 0;
  int K = 0;
  std::vector<unsigned char> y;      // [T_c * K]
  std::vector<unsigned char> valid;  // [T_c * K]

  bool at(int t, int k) const { return y[static_cast<std::size_t>(t) * K + k] != 0; }
  std::size_t positives() const;
  std::size_t valid_count() const;
};

// y = 1 iff the proposal's tIoU with some ground-truth event is strictly
// greater than 0.5; out-of-range proposals are 0 and invalid.
ProposalLabels label_proposals(const synth::SyntheticVideo& video, int K);

// Weight applied to positive terms: clamp(#neg / #pos, 1, 100); 1 when a video
// has no positives.
double positive_weight(const ProposalLabels& labels);

// Weighted BCE over all valid (t, k); invalid entries contribute exactly 0.
nn::Var epn_loss(nn::Tape& tape, const EpnModel& model, const synth::SyntheticVideo& video);
// Same loss from precomputed logits, [T_c * K] in (t, k) order.
nn::Var epn_loss_from_logits(nn::Var logits, const ProposalLabels& labels);

nn::Tensor proposal_vis(const nn::Tensor& hidden, Interval interval);

// Greedy NMS by descending score (ties: earlier start, then shorter). Drops a
// candidate whose tIoU with any kept proposal exceeds `threshold`; stops after
// `max_keep`. Result is ordered by start (then end).
std::vector<Proposal> nms(std::vector<Proposal> proposals, double threshold, std::size_t max_keep);

// Top `top_n` valid proposals by confidence, then NMS. Each survivor carries
// Vis(p).
std::vector<Proposal> extract_candidates(const ProposalScores& scores, int top_n,
                                         double nms_threshold, int max_candidates);
std::vector<Proposal> extract_candidates(const EpnModel& model, const synth::SyntheticVideo& video);

// Score order used by ranking and NMS.
bool proposal_rank_less(const Proposal& a, const Proposal& b);

}  // namespace densecap::epn

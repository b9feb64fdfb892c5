#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "densecap/epn.hpp"
#include "densecap/model_config.hpp"
#include "densecap/nn/cells.hpp"

namespace densecap {
class Rng;
}

// Pointer-network event sequence selection over the EPN candidate set.
// Attention index 0 is the learned END proposal; index j >= 1 is candidate
// j - 1.
namespace densecap::esgn {

// Binary mask over `loc_dim` equal bins of [0, T_c): exactly
// max(1, round(loc_dim * len / T_c)) contiguous ones centred on the interval.
nn::Tensor location_mask(Interval interval, int num_segments, int loc_dim);
// u(p) = [Loc(p); Vis(p)]
nn::Tensor pointer_embedding(const epn::Proposal& p, int num_segments, int loc_dim);

struct EventSequence {
  std::vector<epn::Proposal> events;
  std::vector<int> candidate_index;  // position of each event in the candidate list
  bool terminated = false;           // END was selected

  std::size_t size() const noexcept { return events.size(); }
  bool empty() const noexcept { return events.empty(); }
};

class EsgnModel {
 public:
  static void declare(nn::ParamStore& store, const EsgnConfig& cfg, std::size_t vis_dim, Rng& rng);
  EsgnModel(nn::ParamStore& store, const EsgnConfig& cfg);

  std::size_t vis_dim() const noexcept { return encoder_.input_dim; }
  std::size_t embed_dim() const noexcept { return pointer_.input_dim; }
  const EsgnConfig& config() const noexcept { return cfg_; }

  // Per-video attention context: projected embeddings of END + candidates.
  struct Context {
    std::vector<nn::Tensor> embeddings;  // u(p_1..p_M)
    nn::Var projected;                   // [M + 1, A]
    nn::Var ones;                        // [M + 1, 1] for bias broadcast
  };
  Context make_context(nn::Tape& tape, const std::vector<epn::Proposal>& candidates,
                       int num_segments) const;

  // h_0^ptr from a GRU over Vis(p_1..p_M) in candidate order. Throws
  // ContractViolation on an empty candidate set; callers then fall back to an
  // empty sequence.
  nn::Var encode_candidates(nn::Tape& tape, const std::vector<epn::Proposal>& candidates) const;

  nn::LstmState initial_state(nn::Tape& tape, nn::Var h0) const;
  // One pointer step; `input` is u(ê_{t-1}) or the learned start input.
  nn::LstmState pointer_step(nn::Var input, nn::LstmState state) const;
  nn::Var start_input(nn::Tape& tape) const;
  nn::Var end_embedding(nn::Tape& tape) const;

  // Logits of a_t over [END, p_1..p_M]; a_t = sigmoid(logits).
  nn::Var attention_logits(const Context& ctx, nn::Var h) const;

 private:
  EsgnConfig cfg_;
  nn::GruCell encoder_;
  nn::LstmCell pointer_;
  nn::Parameter* w_embed_;   // W1 [A, u]
  nn::Parameter* w_hidden_;  // W2 [A, H]
  nn::Parameter* b_att_;     // [A]
  nn::Parameter* v_att_;     // w [A]
  nn::Parameter* b_out_;     // [1]
  nn::Parameter* end_;       // u(p_end)
  nn::Parameter* start_;
};

// a_t = sigmoid(w^T tanh(W1 u(p_j) + W2 h + b) + c) for j = 0..M, evaluated
// without recording gradients.
nn::Tensor attention_scores(const EsgnModel& model, const nn::Tensor& h,
                            const std::vector<epn::Proposal>& candidates, int num_segments);

struct SelectOptions {
  // Applied elementwise to the step logits before the argmax; must be strictly
  // increasing. Used to probe selection invariance.
  std::function<double(double)> logit_transform;
};

// Greedy pointer decoding: argmax over END and not-yet-selected candidates
// until END or N_max. Empty candidates yield an empty, terminated sequence.
EventSequence select_sequence(const EsgnModel& model, const std::vector<epn::Proposal>& candidates,
                              int num_segments, const SelectOptions& options = {});

// Stochastic variant: each step draws from softmax(logits) over END and the
// available candidates.
EventSequence sample_sequence(const EsgnModel& model, const std::vector<epn::Proposal>& candidates,
                              int num_segments, Rng& rng);

// Index (into candidates) of the candidate with maximal tIoU to `event`; ties
// go to the earlier candidate.
std::size_t best_match(const std::vector<epn::Proposal>& candidates, Interval event);

// Soft-target BCE: for each GT event n (start order), targets tIoU(p_m, e_n)
// on candidates and 0 on END; one terminal step targets END = 1, others 0.
// Teacher forcing feeds u of the best-matching candidate of e_{n-1}.
nn::Var esgn_loss(nn::Tape& tape, const EsgnModel& model, const std::vector<epn::Proposal>& candidates,
                  const std::vector<Interval>& gt_events, int num_segments);

}  // namespace densecap::esgn

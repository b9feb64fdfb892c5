#pragma once

#include <cstddef>
#include <vector>

#include "densecap/epn.hpp"
#include "densecap/model_config.hpp"
#include "densecap/nn/cells.hpp"
#include "densecap/synth/corpus.hpp"

namespace densecap {
class Rng;
}

// Hierarchical captioner: an episode LSTM threads (Vis, previous caption
// feature) across events; an event LSTM with temporal attention and a context
// gate decodes each caption starting from the episode state.
namespace densecap::scn {

struct EventContext {
  nn::Tensor seg_feats;  // [S, D] segment features inside the interval
  nn::Tensor vis;        // Vis(e)
};

EventContext make_context(const nn::Tensor& segments, Interval interval, nn::Tensor vis);
inline EventContext make_context(const nn::Tensor& segments, const epn::Proposal& p) {
  return make_context(segments, p.interval, p.vis);
}

enum class DecodeMode { kGreedy, kSample };

class ScnModel {
 public:
  static void declare(nn::ParamStore& store, const ScnConfig& cfg, std::size_t feat_dim,
                      std::size_t vis_dim, std::size_t vocab_size, Rng& rng);
  ScnModel(nn::ParamStore& store, const ScnConfig& cfg);

  const ScnConfig& config() const noexcept { return cfg_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t hidden_dim() const noexcept { return episode_.hidden_dim; }
  std::size_t feat_dim() const noexcept { return feat_dim_; }
  std::size_t vis_dim() const noexcept { return vis_dim_; }
  std::size_t embed_dim() const noexcept { return embed_dim_; }
  std::size_t gate_dim() const noexcept { return gate_dim_; }

  // Event-invariant projections, computed once per event.
  struct Prepared {
    nn::Var seg;        // [S, D]
    nn::Var seg_proj;   // W_c C3D(e_s), [S, A]
    nn::Var vis_proj;   // W_v Vis(e), [A]
    nn::Var vis_gate;   // v̄ = tanh(W_v̄ Vis(e)), [G]
  };
  Prepared prepare(nn::Tape& tape, const EventContext& ctx) const;

  struct Attention {
    nn::Var z;        // [D]
    nn::Var weights;  // [S]
  };
  Attention attend(const Prepared& ev, nn::Var h_prev) const;

  struct Gate {
    nn::Var o;  // [2G]
    nn::Var k;  // [G]
  };
  Gate gate(nn::Var z, nn::Var vis_gate, nn::Var x, nn::Var h_prev) const;

  nn::LstmState episode_step(nn::Var vis, nn::Var g_prev, nn::LstmState state) const;

  struct WordStep {
    nn::LstmState state;
    nn::Var logits;  // [V]
  };
  WordStep word_step(const Prepared& ev, std::size_t prev_token, nn::LstmState state) const;

  nn::Var embedding(nn::Tape& tape, std::size_t token) const;

 private:
  ScnConfig cfg_;
  std::size_t vocab_size_;
  std::size_t feat_dim_;
  std::size_t vis_dim_;
  std::size_t embed_dim_;
  std::size_t gate_dim_;
  nn::LstmCell episode_;
  nn::LstmCell event_;
  nn::Parameter* wemb_;
  nn::Parameter* w_p_;
  nn::Parameter* b_p_;
  nn::Parameter* w_alpha_;
  nn::Parameter* w_c_;
  nn::Parameter* w_v_;
  nn::Parameter* w_h_;
  nn::Parameter* w_z_;
  nn::Parameter* w_vbar_;
  nn::Parameter* w_k_;
};

// Stand-alone spellings of the per-step blocks (fresh projections each call).
ScnModel::Attention tda_attend(const ScnModel& model, nn::Tape& tape, const EventContext& ctx,
                               nn::Var h_prev);
ScnModel::Gate context_gate(const ScnModel& model, nn::Var z, const nn::Tensor& vis, nn::Var x,
                            nn::Var h_prev);

struct Decoded {
  synth::CaptionTokens tokens;  // ends with EOS unless max_len was hit
  nn::Var g;                    // caption feature: last event-LSTM hidden
  nn::Var logprob;              // Σ log p_t(w_t) on the tape
  double logprob_value = 0.0;
};

// Decoding never emits PAD or BOS: both are masked out of p_t, and logprob is
// taken under the masked, temperature-scaled distribution. `rng` is required
// for sampling.
Decoded decode_caption(const ScnModel& model, nn::Tape& tape, const EventContext& ctx, nn::Var r,
                       DecodeMode mode, int max_len, double temperature, Rng* rng = nullptr);

// Σ log p_t(w_t) of the given tokens under the same masked distribution the
// decoder samples from.
double caption_logprob(const ScnModel& model, const EventContext& ctx, const nn::Tensor& r,
                       const synth::CaptionTokens& tokens, double temperature);

struct SequenceOptions {
  DecodeMode mode = DecodeMode::kGreedy;
  double temperature = 1.0;
  // Reset the episode state before every event (context-free ablation).
  bool independent = false;
};

// Runs episode_step and decode_caption over the events in order, threading
// (r, g). The tape must outlive the returned Vars.
std::vector<Decoded> caption_sequence(const ScnModel& model, nn::Tape& tape,
                                      const std::vector<EventContext>& events,
                                      const SequenceOptions& options, Rng* rng = nullptr);

// Convenience: greedy/sampled token lists without gradients.
std::vector<synth::CaptionTokens> caption_tokens(const ScnModel& model,
                                                 const std::vector<EventContext>& events,
                                                 const SequenceOptions& options, Rng* rng = nullptr);

// Teacher-forced negative log-likelihood summed over all tokens of all events
// (full softmax, tokens after the first EOS ignored). Throws std::out_of_range
// on a token id outside the vocabulary.
nn::Var scn_nll(nn::Tape& tape, const ScnModel& model, const std::vector<EventContext>& events,
                const std::vector<synth::CaptionTokens>& captions);

// Number of tokens scn_nll scores for this caption.
std::size_t scored_length(const synth::CaptionTokens& caption);

}  // namespace densecap::scn

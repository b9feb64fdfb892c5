#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "densecap/config.hpp"
#include "densecap/metrics.hpp"
#include "densecap/nn/adam.hpp"
#include "densecap/nn/checkpoint.hpp"
#include "densecap/pipeline.hpp"
#include "densecap/rng.hpp"
#include "densecap/scn.hpp"

namespace densecap::training {

enum class Stage { kEpn, kEsgn, kScn, kRl };
std::string stage_name(Stage s);
Stage parse_stage(const std::string& name);
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Stage s);
std::filesystem::path log_path(const std::filesystem::path& output_dir, Stage s);

// A checkpoint pinned in memory; models keep pointers into `ckpt.params`.
struct Loaded {
  nn::Checkpoint ckpt;
  RunConfig config;  // config the checkpoint was trained with
};
// Throws MissingPrerequisite if the file is absent and ContractViolation if
// its vocabulary fingerprint differs from `vocab`.
std::unique_ptr<Loaded> load_stage(const std::filesystem::path& dir, Stage s, const synth::Vocabulary& vocab);

// ---------------------------------------------------------------- rewards

struct ReferenceMatch {
  std::vector<std::size_t> gt_index;  // into the GT list, per detected event
  std::vector<double> overlap;        // tIoU of each match
  std::size_t zero_overlap = 0;       // matches with tIoU 0
};
// ẽ_n = argmax_GT tIoU(ê_n, ·), ties to the earlier start (then earlier end,
// then lower index). Many detected events may share one GT event.
ReferenceMatch match_reference_sequence(const std::vector<Interval>& detected, const std::vector<Interval>& gt);

// Event- and episode-level similarity f. Episode scoring applies the sentence
// metric to paragraphs (captions concatenated in temporal order).
class RewardFunction {
 public:
  // CIDEr with IDF from `event_docs` (captions) and `episode_docs`
  // (paragraphs).
  static RewardFunction cider(const std::vector<metrics::Tokens>& event_docs,
                              const std::vector<metrics::Tokens>& episode_docs);
  static RewardFunction bleu4();

  double event(const metrics::Tokens& candidate, const metrics::Tokens& reference) const;
  double episode(const metrics::Tokens& candidate, const metrics::Tokens& reference) const;
  RewardMetric metric() const noexcept { return metric_; }

 private:
  RewardMetric metric_ = RewardMetric::kBleu4;
  std::shared_ptr<const metrics::CiderScorer> event_idf_;
  std::shared_ptr<const metrics::CiderScorer> episode_idf_;
};

struct RewardReport {
  std::vector<double> event_terms;  // f(d̂_n, d̃_n) − f(ď_n, d̃_n)
  double episode_term = 0.0;        // f(D̂, D̃) − f(Ď, D̃)
  std::vector<double> total;        // event term + episode term
};

// Concatenates captions' word tokens following `order` (identity if empty).
metrics::Tokens paragraph(const std::vector<synth::CaptionTokens>& captions, const std::vector<std::size_t>& order = {});
// Indices sorted by (start, end), stable.
std::vector<std::size_t> temporal_order(const std::vector<Interval>& events);

// sampled/baseline/references are aligned per event. Paragraphs use
// `sampled_order` for D̂ and `reference_order` for Ď and D̃.
RewardReport compute_rewards(const std::vector<synth::CaptionTokens>& sampled,
                             const std::vector<synth::CaptionTokens>& baseline,
                             const std::vector<synth::CaptionTokens>& references, const RewardFunction& f,
                             const std::vector<std::size_t>& sampled_order = {},
                             const std::vector<std::size_t>& reference_order = {});

// -------------------------------------------------------------------- RL

// Everything rl_step needs about one video, precomputed from frozen EPN/ESGN.
struct RlExample {
  std::vector<scn::EventContext> detected;     // ê, in ESGN order
  std::vector<Interval> detected_intervals;
  std::vector<scn::EventContext> reference;    // ẽ, aligned with detected
  std::vector<Interval> reference_intervals;
  std::vector<synth::CaptionTokens> references;  // d̃, aligned with detected
};
RlExample make_rl_example(const pipeline::VideoFeatures& f, const std::vector<epn::Proposal>& detected);

struct RlOptions {
  int rollouts = 16;
  double temperature = 1.0;
  double clip_norm = 5.0;
};

struct RlStepStats {
  double surrogate = 0.0;   // −(1/R_n) Σ R·log p
  double reward_mean = 0.0;  // mean per-event total reward
  double reward_sq = 0.0;    // mean squared per-event total reward
  double sampled_score = 0.0;   // mean event-level f of samples
  double baseline_score = 0.0;  // mean event-level f of the baseline
  std::size_t terms = 0;
  bool skipped = false;
};

// One REINFORCE update: samples R_n caption sets on the detected sequence,
// baselines with greedy captions on the reference sequence, backpropagates
// −(1/R_n) Σ_rollouts Σ_n R(d̂_n) log p(d̂_n) into the SCN and applies Adam.
// An empty detected sequence is skipped.
RlStepStats rl_step(const scn::ScnModel& model, nn::ParamStore& store, nn::Adam& adam, const RlExample& example,
                    const RewardFunction& f, const RlOptions& options, Rng& rng);

// Gradient of the surrogate without applying it (leaves grads in `store`).
RlStepStats rl_gradient(const scn::ScnModel& model, nn::ParamStore& store, const RlExample& example,
                        const RewardFunction& f, const RlOptions& options, Rng& rng);

// --------------------------------------------------------------- stages

// Held-out perplexities of the teacher-forced SCN and of a unigram model
// fitted to the training captions (add-one smoothing).
struct Perplexity {
  double model = 0.0;
  double unigram = 0.0;
  std::size_t tokens = 0;
};
Perplexity scn_perplexity(const scn::ScnModel& model, const std::vector<pipeline::VideoFeatures>& heldout,
                          const std::vector<const synth::SyntheticVideo*>& train, std::size_t vocab_size);

struct EpochLog {
  Stage stage = Stage::kEpn;
  int epoch = 0;
  double loss = 0.0;
  std::size_t updates = 0;
  std::size_t skipped = 0;
  std::optional<double> reward_mean;
  std::optional<double> reward_std;
  std::vector<std::pair<std::string, double>> eval;
};
std::string epoch_log_json(const EpochLog& log);

struct StageResult {
  std::filesystem::path checkpoint;
  std::vector<EpochLog> log;
};

struct TrainHooks {
  // Called after each epoch (after the log line is written).
  std::function<void(const EpochLog&)> on_epoch;
};

// Trains one stage on the train split, evaluates on the held-out split, and
// writes <checkpoints>/<stage>.ckpt and <output>/logs/<stage>.jsonl.
StageResult train_stage(Stage stage, const synth::Corpus& corpus, const RunConfig& config,
                        const TrainHooks& hooks = {});

}  // namespace densecap::training

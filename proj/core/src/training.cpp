#include "densecap/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "densecap/epn.hpp"
#include "densecap/error.hpp"
#include "densecap/esgn.hpp"
#include "densecap/nn/ops.hpp"
#include "densecap/util/bytes.hpp"

namespace densecap::training {

using nlohmann::json;
using nn::Tape;
using nn::Tensor;
using nn::Var;

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::kEpn: return "epn";
    case Stage::kEsgn: return "esgn";
    case Stage::kScn: return "scn";
    case Stage::kRl: return "rl";
  }
  return "?";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::kEpn, Stage::kEsgn, Stage::kScn, Stage::kRl}) {
    if (stage_name(s) == name) return s;
  }
  throw ConfigError("stage: expected epn, esgn, scn or rl, got \"" + name + "\"");
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, Stage s) {
  return dir / (stage_name(s) + ".ckpt");
}

std::filesystem::path log_path(const std::filesystem::path& output_dir, Stage s) {
  return output_dir / "logs" / (stage_name(s) + ".jsonl");
}

namespace {

const char* prerequisite_hint(Stage s) {
  switch (s) {
    case Stage::kEpn: return "run `train epn` first";
    case Stage::kEsgn: return "run `train esgn` first";
    case Stage::kScn: return "run `train scn` first";
    case Stage::kRl: return "run `train rl` first";
  }
  return "";
}

std::string compact_config(const RunConfig& c) { return json::parse(config_to_json(c)).dump(); }

}  // namespace

std::unique_ptr<Loaded> load_stage(const std::filesystem::path& dir, Stage s, const synth::Vocabulary& vocab) {
  const auto path = checkpoint_path(dir, s);
  if (!std::filesystem::exists(path)) {
    throw MissingPrerequisite("missing " + stage_name(s) + " checkpoint " + path.string() + "; " +
                              prerequisite_hint(s));
  }
  auto out = std::make_unique<Loaded>();
  out->ckpt = nn::read_checkpoint(path);
  auto meta = [&](const char* key) -> const std::string& {
    auto it = out->ckpt.meta.find(key);
    if (it == out->ckpt.meta.end()) throw ParseError(path.string() + ": checkpoint lacks meta key '" + key + "'");
    return it->second;
  };
  if (meta("vocab") != std::to_string(vocab.fingerprint())) {
    throw ContractViolation(path.string() + ": vocabulary mismatch between checkpoint (" + meta("vocab") +
                            ") and corpus (" + std::to_string(vocab.fingerprint()) + ")");
  }
  out->config = config_from_json(meta("config"));
  return out;
}

// ---------------------------------------------------------------- rewards

ReferenceMatch match_reference_sequence(const std::vector<Interval>& detected, const std::vector<Interval>& gt) {
  if (gt.empty()) throw std::invalid_argument("match_reference_sequence: no ground-truth events");
  ReferenceMatch m;
  for (const auto& e : detected) {
    std::size_t best = 0;
    double best_iou = tiou(e, gt[0]);
    for (std::size_t g = 1; g < gt.size(); ++g) {
      const double v = tiou(e, gt[g]);
      if (v > best_iou || (v == best_iou && gt[g] < gt[best])) {
        best = g;
        best_iou = v;
      }
    }
    m.gt_index.push_back(best);
    m.overlap.push_back(best_iou);
    if (best_iou == 0.0) ++m.zero_overlap;
  }
  return m;
}

RewardFunction RewardFunction::cider(const std::vector<metrics::Tokens>& event_docs,
                                     const std::vector<metrics::Tokens>& episode_docs) {
  RewardFunction f;
  f.metric_ = RewardMetric::kCider;
  f.event_idf_ = std::make_shared<metrics::CiderScorer>(event_docs);
  f.episode_idf_ = std::make_shared<metrics::CiderScorer>(episode_docs);
  return f;
}

RewardFunction RewardFunction::bleu4() { return RewardFunction{}; }

double RewardFunction::event(const metrics::Tokens& candidate, const metrics::Tokens& reference) const {
  if (metric_ == RewardMetric::kCider) return event_idf_->score(candidate, {reference});
  return metrics::bleu(candidate, {reference}, 4);
}

double RewardFunction::episode(const metrics::Tokens& candidate, const metrics::Tokens& reference) const {
  if (metric_ == RewardMetric::kCider) return episode_idf_->score(candidate, {reference});
  return metrics::bleu(candidate, {reference}, 4);
}

metrics::Tokens paragraph(const std::vector<synth::CaptionTokens>& captions, const std::vector<std::size_t>& order) {
  metrics::Tokens out;
  for (std::size_t k = 0; k < captions.size(); ++k) {
    const auto words = metrics::content_tokens(captions[order.empty() ? k : order[k]]);
    out.insert(out.end(), words.begin(), words.end());
  }
  return out;
}

std::vector<std::size_t> temporal_order(const std::vector<Interval>& events) {
  std::vector<std::size_t> idx(events.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return events[a] < events[b]; });
  return idx;
}

RewardReport compute_rewards(const std::vector<synth::CaptionTokens>& sampled,
                             const std::vector<synth::CaptionTokens>& baseline,
                             const std::vector<synth::CaptionTokens>& references, const RewardFunction& f,
                             const std::vector<std::size_t>& sampled_order,
                             const std::vector<std::size_t>& reference_order) {
  if (sampled.size() != baseline.size() || sampled.size() != references.size()) {
    throw std::invalid_argument("compute_rewards: caption sets differ in size");
  }
  RewardReport r;
  r.episode_term = f.episode(paragraph(sampled, sampled_order), paragraph(references, reference_order)) -
                   f.episode(paragraph(baseline, reference_order), paragraph(references, reference_order));
  for (std::size_t n = 0; n < sampled.size(); ++n) {
    const auto ref = metrics::content_tokens(references[n]);
    r.event_terms.push_back(f.event(metrics::content_tokens(sampled[n]), ref) -
                            f.event(metrics::content_tokens(baseline[n]), ref));
    r.total.push_back(r.event_terms.back() + r.episode_term);
    if (!std::isfinite(r.total.back())) throw NumericError("compute_rewards: non-finite reward");
  }
  return r;
}

// -------------------------------------------------------------------- RL

RlExample make_rl_example(const pipeline::VideoFeatures& f, const std::vector<epn::Proposal>& detected) {
  RlExample ex;
  if (detected.empty()) return ex;
  const auto& video = *f.video;
  std::vector<Interval> gt;
  for (const auto& e : video.events) gt.push_back(e.interval);
  for (const auto& p : detected) ex.detected_intervals.push_back(p.interval);
  ex.detected = pipeline::proposal_contexts(f, detected);
  const auto match = match_reference_sequence(ex.detected_intervals, gt);
  for (std::size_t g : match.gt_index) {
    const Interval iv = gt[g];
    ex.reference_intervals.push_back(iv);
    ex.reference.push_back(scn::make_context(video.segments, iv, epn::proposal_vis(f.hidden, iv)));
    ex.references.push_back(video.events[g].caption);
  }
  return ex;
}

RlStepStats rl_gradient(const scn::ScnModel& model, nn::ParamStore& store, const RlExample& example,
                        const RewardFunction& f, const RlOptions& options, Rng& rng) {
  RlStepStats stats;
  store.zero_grad();
  if (example.detected.empty()) {
    stats.skipped = true;
    return stats;
  }
  scn::SequenceOptions greedy;
  const auto baseline = scn::caption_tokens(model, example.reference, greedy);
  const auto sampled_order = temporal_order(example.detected_intervals);
  const auto reference_order = temporal_order(example.reference_intervals);

  Tape tape;
  scn::SequenceOptions sample;
  sample.mode = scn::DecodeMode::kSample;
  sample.temperature = options.temperature;
  std::vector<Var> terms;
  const double inv_r = 1.0 / options.rollouts;
  for (int r = 0; r < options.rollouts; ++r) {
    auto decoded = scn::caption_sequence(model, tape, example.detected, sample, &rng);
    std::vector<synth::CaptionTokens> tokens;
    for (auto& d : decoded) tokens.push_back(d.tokens);
    const auto report = compute_rewards(tokens, baseline, example.references, f, sampled_order, reference_order);
    for (std::size_t n = 0; n < decoded.size(); ++n) {
      const double R = report.total[n];
      stats.reward_mean += R;
      stats.reward_sq += R * R;
      stats.surrogate -= inv_r * R * decoded[n].logprob_value;
      const auto ref = metrics::content_tokens(example.references[n]);
      stats.sampled_score += f.event(metrics::content_tokens(tokens[n]), ref);
      stats.baseline_score += f.event(metrics::content_tokens(baseline[n]), ref);
      ++stats.terms;
      if (R != 0.0) terms.push_back(nn::scale(decoded[n].logprob, -inv_r * R));
    }
  }
  if (stats.terms > 0) {
    const auto k = static_cast<double>(stats.terms);
    stats.reward_mean /= k;
    stats.reward_sq /= k;
    stats.sampled_score /= k;
    stats.baseline_score /= k;
  }
  if (!std::isfinite(stats.surrogate)) throw NumericError("rl_step: non-finite surrogate loss");
  if (!terms.empty()) tape.backward(nn::sum(nn::concat(terms)));
  return stats;
}

RlStepStats rl_step(const scn::ScnModel& model, nn::ParamStore& store, nn::Adam& adam, const RlExample& example,
                    const RewardFunction& f, const RlOptions& options, Rng& rng) {
  auto stats = rl_gradient(model, store, example, f, options, rng);
  if (stats.skipped) return stats;
  if (!std::isfinite(nn::global_grad_norm(store))) throw NumericError("rl_step: non-finite gradient");
  if (options.clip_norm > 0.0) nn::clip_grad_norm(store, options.clip_norm);
  adam.step(store);  // kNoGradients when every reward was zero: parameters stay put
  return stats;
}

// --------------------------------------------------------------- stages

Perplexity scn_perplexity(const scn::ScnModel& model, const std::vector<pipeline::VideoFeatures>& heldout,
                          const std::vector<const synth::SyntheticVideo*>& train, std::size_t vocab_size) {
  std::vector<double> counts(vocab_size, 0.0);
  double total = 0.0;
  for (const auto* v : train) {
    for (const auto& e : v->events) {
      const std::size_t n = scn::scored_length(e.caption);
      for (std::size_t t = 0; t < n; ++t) counts[static_cast<std::size_t>(e.caption[t])] += 1.0;
      total += static_cast<double>(n);
    }
  }
  const double emittable = static_cast<double>(vocab_size - 2);  // PAD and BOS are never targets
  Perplexity p;
  double model_nll = 0.0, unigram_nll = 0.0;
  for (const auto& f : heldout) {
    const auto captions = pipeline::gt_captions(*f.video);
    Tape tape(Tape::Mode::kInference);
    model_nll += scn::scn_nll(tape, model, pipeline::gt_contexts(f), captions).item();
    for (const auto& c : captions) {
      const std::size_t n = scn::scored_length(c);
      for (std::size_t t = 0; t < n; ++t) {
        unigram_nll -= std::log((counts[static_cast<std::size_t>(c[t])] + 1.0) / (total + emittable));
      }
      p.tokens += n;
    }
  }
  if (p.tokens > 0) {
    p.model = std::exp(model_nll / static_cast<double>(p.tokens));
    p.unigram = std::exp(unigram_nll / static_cast<double>(p.tokens));
  }
  return p;
}

std::string epoch_log_json(const EpochLog& log) {
  json j = {{"stage", stage_name(log.stage)},
            {"epoch", log.epoch},
            {"loss", log.loss},
            {"updates", log.updates},
            {"skipped", log.skipped}};
  if (log.reward_mean) j["reward_mean"] = *log.reward_mean;
  if (log.reward_std) j["reward_std"] = *log.reward_std;
  json ev = json::object();
  for (const auto& [k, v] : log.eval) ev[k] = v;
  j["eval"] = ev;
  return j.dump();
}

namespace {

std::vector<std::size_t> shuffled(std::size_t n, std::uint64_t seed, Stage stage, int epoch) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed, "shuffle." + stage_name(stage), static_cast<std::uint64_t>(epoch));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i - 1)));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

void check_finite(double loss, Stage stage, int epoch, const std::string& video) {
  if (!std::isfinite(loss)) {
    throw NumericError("train " + stage_name(stage) + ": non-finite loss at epoch " + std::to_string(epoch) +
                       " on video " + video);
  }
}

bool should_eval(const TrainConfig& t, int epoch, int epochs) {
  return t.eval_every > 0 && (epoch % t.eval_every == 0 || epoch == epochs);
}

std::vector<Interval> gt_intervals(const synth::SyntheticVideo& v) {
  std::vector<Interval> out;
  for (auto i : pipeline::gt_order(v)) out.push_back(v.events[i].interval);
  return out;
}

class StageRunner {
 public:
  StageRunner(Stage stage, const synth::Corpus& corpus, const RunConfig& config, const TrainHooks& hooks)
      : stage_(stage),
        corpus_(corpus),
        config_(config),
        hooks_(hooks),
        train_(synth::select_split(corpus, synth::Split::kTrain)),
        val_(synth::select_split(corpus, synth::Split::kVal)) {
    if (train_.empty()) throw ConfigError("corpus has no training videos");
  }

  StageResult run() {
    std::filesystem::create_directories(log_path(config_.paths.output, stage_).parent_path());
    log_text_.clear();
    switch (stage_) {
      case Stage::kEpn: run_epn(); break;
      case Stage::kEsgn: run_esgn(); break;
      case Stage::kScn: run_scn(); break;
      case Stage::kRl: run_rl(); break;
    }
    return std::move(result_);
  }

 private:
  int epochs() const {
    switch (stage_) {
      case Stage::kEpn: return config_.train.epochs_epn;
      case Stage::kEsgn: return config_.train.epochs_esgn;
      case Stage::kScn: return config_.train.epochs_scn;
      case Stage::kRl: return config_.train.epochs_rl;
    }
    return 0;
  }

  void record(EpochLog log) {
    log.stage = stage_;
    log_text_ += epoch_log_json(log) + "\n";
    util::write_file(log_path(config_.paths.output, stage_).string(), log_text_);
    result_.log.push_back(log);
    if (hooks_.on_epoch) hooks_.on_epoch(result_.log.back());
  }

  void save(nn::ParamStore& params, const RunConfig* effective = nullptr) {
    nn::Checkpoint ckpt;
    ckpt.meta["stage"] = stage_name(stage_);
    ckpt.meta["config"] = compact_config(effective ? *effective : config_);
    ckpt.meta["vocab"] = std::to_string(corpus_.vocab.fingerprint());
    ckpt.meta["feat_dim"] = std::to_string(corpus_.spec.feat_dim);
    ckpt.params = params;
    result_.checkpoint = checkpoint_path(config_.paths.checkpoints, stage_);
    nn::write_checkpoint(result_.checkpoint, ckpt);
    if (epochs() == 0) util::write_file(log_path(config_.paths.output, stage_).string(), "");
  }

  std::unique_ptr<Loaded> load(Stage s) const { return load_stage(config_.paths.checkpoints, s, corpus_.vocab); }

  // Generic supervised loop over the train split.
  template <typename LossFn, typename EvalFn>
  void supervised(nn::ParamStore& store, LossFn loss_fn, EvalFn eval_fn) {
    nn::Adam adam(config_.train.adam);
    const int E = epochs();
    for (int epoch = 1; epoch <= E; ++epoch) {
      EpochLog log;
      log.epoch = epoch;
      double sum = 0.0;
      for (std::size_t i : shuffled(train_.size(), config_.seed, stage_, epoch)) {
        store.zero_grad();
        Tape tape;
        std::optional<Var> loss = loss_fn(tape, i);
        if (!loss) {
          ++log.skipped;
          continue;
        }
        const double value = loss->item();
        check_finite(value, stage_, epoch, train_[i]->id);
        tape.backward(*loss);
        adam.step(store);
        sum += value;
        ++log.updates;
      }
      log.loss = log.updates ? sum / static_cast<double>(log.updates) : 0.0;
      if (should_eval(config_.train, epoch, E)) log.eval = eval_fn();
      record(std::move(log));
    }
  }

  void run_epn() {
    nn::ParamStore store;
    Rng init(config_.seed, "init.epn");
    epn::EpnModel::declare(store, config_.model.epn, static_cast<std::size_t>(corpus_.spec.feat_dim), init);
    epn::EpnModel model(store, config_.model.epn);
    supervised(
        store, [&](Tape& tape, std::size_t i) -> std::optional<Var> { return epn::epn_loss(tape, model, *train_[i]); },
        [&] {
          const auto feats = pipeline::analyze_all(model, val_, config_.workers);
          std::vector<std::vector<Interval>> pred, gt;
          double cands = 0.0, loss = 0.0;
          for (const auto& f : feats) {
            pred.emplace_back();
            for (const auto& c : f.candidates) pred.back().push_back(c.interval);
            gt.push_back(gt_intervals(*f.video));
            cands += static_cast<double>(f.candidates.size());
            Tape tape(Tape::Mode::kInference);
            loss += epn::epn_loss(tape, model, *f.video).item();
          }
          const double n = std::max<double>(1.0, static_cast<double>(feats.size()));
          const auto det = metrics::detection_scores(pred, gt, {0.5});
          return std::vector<std::pair<std::string, double>>{
              {"val_loss", loss / n}, {"candidate_recall@0.5", det.recall[0]}, {"mean_candidates", cands / n}};
        });
    save(store);
  }

  void run_esgn() {
    const auto epn_ckpt = load(Stage::kEpn);
    const epn::EpnModel epn_model(epn_ckpt->ckpt.params, epn_ckpt->config.model.epn);
    const auto train_feats = pipeline::analyze_all(epn_model, train_, config_.workers);
    const auto val_feats = pipeline::analyze_all(epn_model, val_, config_.workers);
    nn::ParamStore store;
    Rng init(config_.seed, "init.esgn");
    esgn::EsgnModel::declare(store, config_.model.esgn, epn_ckpt->config.model.epn.vis_dim(), init);
    esgn::EsgnModel model(store, config_.model.esgn);
    supervised(
        store,
        [&](Tape& tape, std::size_t i) -> std::optional<Var> {
          const auto& f = train_feats[i];
          if (f.candidates.empty()) return std::nullopt;
          return esgn::esgn_loss(tape, model, f.candidates, gt_intervals(*f.video), f.video->num_segments());
        },
        [&] {
          std::vector<std::vector<Interval>> pred(val_feats.size()), gt(val_feats.size());
          pipeline::parallel_for(val_feats.size(), config_.workers, [&](std::size_t i) {
            const auto& f = val_feats[i];
            for (const auto& e : esgn::select_sequence(model, f.candidates, f.video->num_segments()).events) {
              pred[i].push_back(e.interval);
            }
            gt[i] = gt_intervals(*f.video);
          });
          double selected = 0.0, cands = 0.0, gts = 0.0;
          for (std::size_t i = 0; i < pred.size(); ++i) {
            selected += static_cast<double>(pred[i].size());
            cands += static_cast<double>(val_feats[i].candidates.size());
            gts += static_cast<double>(gt[i].size());
          }
          const double n = std::max<double>(1.0, static_cast<double>(pred.size()));
          const auto det = metrics::detection_scores(pred, gt);
          return std::vector<std::pair<std::string, double>>{{"avg_recall", det.avg_recall},
                                                             {"avg_precision", det.avg_precision},
                                                             {"mean_selected", selected / n},
                                                             {"mean_candidates", cands / n},
                                                             {"mean_gt", gts / n}};
        });
    save(store);
  }

  void run_scn() {
    const auto epn_ckpt = load(Stage::kEpn);
    const epn::EpnModel epn_model(epn_ckpt->ckpt.params, epn_ckpt->config.model.epn);
    const auto train_feats = pipeline::analyze_all(epn_model, train_, config_.workers);
    const auto val_feats = pipeline::analyze_all(epn_model, val_, config_.workers);
    std::vector<std::vector<scn::EventContext>> contexts;
    std::vector<std::vector<synth::CaptionTokens>> captions;
    for (const auto& f : train_feats) {
      contexts.push_back(pipeline::gt_contexts(f));
      captions.push_back(pipeline::gt_captions(*f.video));
    }
    nn::ParamStore store;
    Rng init(config_.seed, "init.scn");
    scn::ScnModel::declare(store, config_.model.scn, static_cast<std::size_t>(corpus_.spec.feat_dim),
                           epn_ckpt->config.model.epn.vis_dim(), corpus_.vocab.size(), init);
    scn::ScnModel model(store, config_.model.scn);
    supervised(
        store,
        [&](Tape& tape, std::size_t i) -> std::optional<Var> {
          return scn::scn_nll(tape, model, contexts[i], captions[i]);
        },
        [&] {
          const auto p = scn_perplexity(model, val_feats, train_, corpus_.vocab.size());
          return std::vector<std::pair<std::string, double>>{
              {"val_perplexity", p.model}, {"unigram_perplexity", p.unigram}};
        });
    save(store);
  }

  void run_rl() {
    const auto epn_ckpt = load(Stage::kEpn);
    const auto esgn_ckpt = load(Stage::kEsgn);
    auto scn_ckpt = load(Stage::kScn);
    const epn::EpnModel epn_model(epn_ckpt->ckpt.params, epn_ckpt->config.model.epn);
    const esgn::EsgnModel esgn_model(esgn_ckpt->ckpt.params, esgn_ckpt->config.model.esgn);
    nn::ParamStore& store = scn_ckpt->ckpt.params;
    ScnConfig scn_cfg = scn_ckpt->config.model.scn;
    scn_cfg.temperature = config_.model.scn.temperature;
    const scn::ScnModel model(store, scn_cfg);

    const auto train_feats = pipeline::analyze_all(epn_model, train_, config_.workers);
    const auto val_feats = pipeline::analyze_all(epn_model, val_, config_.workers);
    std::vector<metrics::Tokens> event_docs, episode_docs;
    for (const auto* v : train_) {
      const auto caps = pipeline::gt_captions(*v);
      for (const auto& c : caps) event_docs.push_back(metrics::content_tokens(c));
      episode_docs.push_back(paragraph(caps));
    }
    const RewardFunction f = config_.train.reward == RewardMetric::kCider
                                 ? RewardFunction::cider(event_docs, episode_docs)
                                 : RewardFunction::bleu4();
    const bool token_mode = config_.train.rl_sampling == RlSampling::kToken;
    std::vector<RlExample> examples(train_feats.size());
    if (token_mode) {
      pipeline::parallel_for(train_feats.size(), config_.workers, [&](std::size_t i) {
        const auto& tf = train_feats[i];
        examples[i] = make_rl_example(tf, esgn::select_sequence(esgn_model, tf.candidates,
                                                                tf.video->num_segments()).events);
      });
    }
    RlOptions opts;
    opts.rollouts = config_.train.rollouts;
    opts.temperature = scn_cfg.temperature;
    opts.clip_norm = config_.train.clip_norm;
    nn::Adam adam(config_.train.adam);

    auto evaluate = [&] {
      const auto preds = pipeline::predict_all(val_feats, esgn_model, model, pipeline::Mode::kSdvc, config_.workers);
      const auto report = pipeline::evaluate(preds, val_);
      double reward = 0.0;
      std::size_t n = 0;
      for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].events.empty()) continue;
        std::vector<Interval> det;
        for (const auto& e : preds[i].events) det.push_back(e.interval);
        std::vector<Interval> gt;
        for (const auto& e : val_feats[i].video->events) gt.push_back(e.interval);
        const auto match = match_reference_sequence(det, gt);
        for (std::size_t k = 0; k < det.size(); ++k) {
          reward += f.event(metrics::content_tokens(preds[i].events[k].caption),
                            metrics::content_tokens(val_feats[i].video->events[match.gt_index[k]].caption));
          ++n;
        }
      }
      return std::vector<std::pair<std::string, double>>{
          {"dense_cider", report.captions.avg_cider},
          {"dense_bleu4", report.captions.avg_bleu[3]},
          {"greedy_event_reward", n ? reward / static_cast<double>(n) : 0.0}};
    };

    const int E = epochs();
    if (E > 0 && config_.train.eval_every > 0) {
      EpochLog base;
      base.epoch = 0;
      base.eval = evaluate();
      record(std::move(base));
    }
    for (int epoch = 1; epoch <= E; ++epoch) {
      EpochLog log;
      log.epoch = epoch;
      Rng rng(config_.seed, "rl.sample", static_cast<std::uint64_t>(epoch));
      double loss = 0.0, r1 = 0.0, r2 = 0.0;
      std::size_t terms = 0;
      for (std::size_t i : shuffled(train_.size(), config_.seed, stage_, epoch)) {
        RlExample sampled_example;
        const RlExample* ex = &examples[i];
        if (!token_mode) {
          const auto& tf = train_feats[i];
          sampled_example = make_rl_example(
              tf, esgn::sample_sequence(esgn_model, tf.candidates, tf.video->num_segments(), rng).events);
          ex = &sampled_example;
        }
        const auto stats = rl_step(model, store, adam, *ex, f, opts, rng);
        if (stats.skipped) {
          ++log.skipped;
          continue;
        }
        check_finite(stats.surrogate, stage_, epoch, train_[i]->id);
        ++log.updates;
        loss += stats.surrogate;
        r1 += stats.reward_mean * static_cast<double>(stats.terms);
        r2 += stats.reward_sq * static_cast<double>(stats.terms);
        terms += stats.terms;
      }
      log.loss = log.updates ? loss / static_cast<double>(log.updates) : 0.0;
      if (terms > 0) {
        const double mean = r1 / static_cast<double>(terms);
        log.reward_mean = mean;
        log.reward_std = std::sqrt(std::max(0.0, r2 / static_cast<double>(terms) - mean * mean));
      }
      if (should_eval(config_.train, epoch, E)) log.eval = evaluate();
      record(std::move(log));
    }
    RunConfig effective = config_;
    effective.model.scn = scn_cfg;
    save(store, &effective);
  }

  Stage stage_;
  const synth::Corpus& corpus_;
  const RunConfig& config_;
  const TrainHooks& hooks_;
  std::vector<const synth::SyntheticVideo*> train_;
  std::vector<const synth::SyntheticVideo*> val_;
  std::string log_text_;
  StageResult result_;
};

}  // namespace

StageResult train_stage(Stage stage, const synth::Corpus& corpus, const RunConfig& config, const TrainHooks& hooks) {
  validate_config(config);
  return StageResult(StageRunner(stage, corpus, config, hooks).run());
}

}  // namespace densecap::training

#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "densecap/epn.hpp"
#include "densecap/esgn.hpp"
#include "densecap/metrics.hpp"
#include "densecap/scn.hpp"
#include "densecap/synth/corpus.hpp"

// Inference plumbing shared by training, generation and evaluation.
namespace densecap::pipeline {

// Runs fn(i) for i in [0, n) on up to `workers` threads. fn must only write
// to per-index state.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// Frozen-EPN view of one video.
struct VideoFeatures {
  const synth::SyntheticVideo* video = nullptr;
  nn::Tensor hidden;                       // [T_c, H] top-layer states
  std::vector<epn::Proposal> candidates;   // start-sorted
};

VideoFeatures analyze(const epn::EpnModel& model, const synth::SyntheticVideo& video);
std::vector<VideoFeatures> analyze_all(const epn::EpnModel& model,
                                       const std::vector<const synth::SyntheticVideo*>& videos, int workers);

// GT event indices sorted by (start, end).
std::vector<std::size_t> gt_order(const synth::SyntheticVideo& video);
// Contexts and captions of the GT events, in gt_order.
std::vector<scn::EventContext> gt_contexts(const VideoFeatures& f);
std::vector<synth::CaptionTokens> gt_captions(const synth::SyntheticVideo& video);
std::vector<scn::EventContext> proposal_contexts(const VideoFeatures& f, const std::vector<epn::Proposal>& events);

enum class Mode {
  kSdvc,     // ESGN sequence, sequential SCN
  kEsgnInd,  // ESGN sequence, SCN with per-event fresh episode state
  kEpnInd,   // every candidate, captioned independently
};
Mode parse_mode(const std::string& name);
std::string mode_name(Mode mode);

struct PredictedEvent {
  int order = 0;
  Interval interval;
  double score = 0.0;
  synth::CaptionTokens caption;
};

struct VideoPrediction {
  std::string video;
  std::vector<epn::Proposal> candidates;  // vis dropped when read back from dumps
  std::vector<PredictedEvent> events;
};

VideoPrediction predict(const VideoFeatures& f, const esgn::EsgnModel& esgn, const scn::ScnModel& scn, Mode mode);
std::vector<VideoPrediction> predict_all(const std::vector<VideoFeatures>& features, const esgn::EsgnModel& esgn,
                                         const scn::ScnModel& scn, Mode mode, int workers);

struct VideoReport {
  std::string video;
  std::size_t predicted = 0;
  std::size_t gt = 0;
  metrics::DetectionScore detection;
  metrics::CaptionScore captions;
};

struct EvalReport {
  std::size_t videos = 0;
  double mean_predicted = 0.0;
  double mean_gt = 0.0;
  metrics::DetectionScore detection;
  metrics::CaptionScore captions;
  std::vector<VideoReport> per_video;
};

// IDF documents: one per GT caption of the given videos.
metrics::CiderScorer caption_scorer(const std::vector<const synth::SyntheticVideo*>& videos);

// Predictions must cover exactly the given videos (any order). Throws
// ContractViolation naming dangling or missing ids.
EvalReport evaluate(const std::vector<VideoPrediction>& predictions,
                    const std::vector<const synth::SyntheticVideo*>& videos, bool per_video = false);
std::string report_to_json(const EvalReport& report);

// Dump files, one JSON object per line and per video:
//   candidates.jsonl  {"video", "candidates": [{"start","end","score"}]}
//   captions.jsonl    {"video", "events": [{"order","start","end","score","tokens","text"}]}
// A video whose detected sequence is empty has "events": [].
void write_dumps(const std::filesystem::path& dir, const std::vector<VideoPrediction>& predictions,
                 const synth::Vocabulary& vocab);
std::string captions_dump(const std::vector<VideoPrediction>& predictions, const synth::Vocabulary& vocab);
std::string candidates_dump(const std::vector<VideoPrediction>& predictions);
// Reads captions.jsonl (and candidates.jsonl when present next to it).
std::vector<VideoPrediction> read_dumps(const std::filesystem::path& dir);

}  // namespace densecap::pipeline

#include "densecap/pipeline.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "densecap/error.hpp"
#include "densecap/util/bytes.hpp"

namespace densecap::pipeline {

using nlohmann::json;

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::clamp<long>(workers, 1, static_cast<long>(std::max<std::size_t>(1, n))));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

VideoFeatures analyze(const epn::EpnModel& model, const synth::SyntheticVideo& video) {
  const auto& cfg = model.config();
  auto scores = epn::score_proposals(model, video);
  VideoFeatures f;
  f.video = &video;
  f.candidates = epn::extract_candidates(scores, static_cast<std::size_t>(cfg.top_n), cfg.nms_threshold,
                                         static_cast<std::size_t>(cfg.max_candidates));
  f.hidden = std::move(scores.hidden);
  return f;
}

std::vector<VideoFeatures> analyze_all(const epn::EpnModel& model,
                                       const std::vector<const synth::SyntheticVideo*>& videos, int workers) {
  std::vector<VideoFeatures> out(videos.size());
  parallel_for(videos.size(), workers, [&](std::size_t i) { out[i] = analyze(model, *videos[i]); });
  return out;
}

std::vector<std::size_t> gt_order(const synth::SyntheticVideo& video) {
  std::vector<std::size_t> idx(video.events.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](auto a, auto b) { return video.events[a].interval < video.events[b].interval; });
  return idx;
}

std::vector<scn::EventContext> gt_contexts(const VideoFeatures& f) {
  std::vector<scn::EventContext> out;
  for (auto i : gt_order(*f.video)) {
    const Interval iv = f.video->events[i].interval;
    out.push_back(scn::make_context(f.video->segments, iv, epn::proposal_vis(f.hidden, iv)));
  }
  return out;
}

std::vector<synth::CaptionTokens> gt_captions(const synth::SyntheticVideo& video) {
  std::vector<synth::CaptionTokens> out;
  for (auto i : gt_order(video)) out.push_back(video.events[i].caption);
  return out;
}

std::vector<scn::EventContext> proposal_contexts(const VideoFeatures& f, const std::vector<epn::Proposal>& events) {
  std::vector<scn::EventContext> out;
  out.reserve(events.size());
  for (const auto& p : events) out.push_back(scn::make_context(f.video->segments, p));
  return out;
}

Mode parse_mode(const std::string& name) {
  if (name == "sdvc") return Mode::kSdvc;
  if (name == "esgn-ind") return Mode::kEsgnInd;
  if (name == "epn-ind") return Mode::kEpnInd;
  throw ConfigError("mode: expected sdvc, esgn-ind or epn-ind, got \"" + name + "\"");
}

std::string mode_name(Mode mode) {
  switch (mode) {
    case Mode::kSdvc: return "sdvc";
    case Mode::kEsgnInd: return "esgn-ind";
    case Mode::kEpnInd: return "epn-ind";
  }
  return "?";
}

VideoPrediction predict(const VideoFeatures& f, const esgn::EsgnModel& esgn, const scn::ScnModel& scn, Mode mode) {
  VideoPrediction out;
  out.video = f.video->id;
  out.candidates = f.candidates;
  std::vector<epn::Proposal> events;
  if (mode == Mode::kEpnInd) {
    events = f.candidates;
  } else {
    events = esgn::select_sequence(esgn, f.candidates, f.video->num_segments()).events;
  }
  if (events.empty()) return out;
  scn::SequenceOptions opts;
  opts.independent = mode != Mode::kSdvc;
  const auto captions = scn::caption_tokens(scn, proposal_contexts(f, events), opts);
  for (std::size_t i = 0; i < events.size(); ++i) {
    out.events.push_back({static_cast<int>(i), events[i].interval, events[i].score, captions[i]});
  }
  return out;
}

std::vector<VideoPrediction> predict_all(const std::vector<VideoFeatures>& features, const esgn::EsgnModel& esgn,
                                         const scn::ScnModel& scn, Mode mode, int workers) {
  std::vector<VideoPrediction> out(features.size());
  parallel_for(features.size(), workers, [&](std::size_t i) { out[i] = predict(features[i], esgn, scn, mode); });
  return out;
}

metrics::CiderScorer caption_scorer(const std::vector<const synth::SyntheticVideo*>& videos) {
  std::vector<metrics::Tokens> docs;
  for (const auto* v : videos) {
    for (const auto& e : v->events) docs.push_back(metrics::content_tokens(e.caption));
  }
  return metrics::CiderScorer(docs);
}

namespace {

std::vector<metrics::Captioned> predicted_captions(const VideoPrediction& p) {
  std::vector<metrics::Captioned> out;
  for (const auto& e : p.events) out.push_back({e.interval, e.caption});
  return out;
}

std::vector<metrics::Captioned> gt_captioned(const synth::SyntheticVideo& v) {
  std::vector<metrics::Captioned> out;
  for (const auto& e : v.events) out.push_back({e.interval, e.caption});
  return out;
}

std::vector<Interval> intervals(const std::vector<metrics::Captioned>& xs) {
  std::vector<Interval> out;
  for (const auto& x : xs) out.push_back(x.interval);
  return out;
}

json detection_json(const metrics::DetectionScore& d) {
  json per = json::object();
  for (std::size_t i = 0; i < d.thresholds.size(); ++i) {
    std::ostringstream key;
    key << d.thresholds[i];
    per[key.str()] = {{"recall", d.recall[i]}, {"precision", d.precision[i]}};
  }
  return {{"avg_recall", d.avg_recall}, {"avg_precision", d.avg_precision}, {"per_threshold", per}};
}

json caption_json(const metrics::CaptionScore& c) {
  json per = json::object();
  for (std::size_t i = 0; i < c.thresholds.size(); ++i) {
    std::ostringstream key;
    key << c.thresholds[i];
    per[key.str()] = {{"bleu1", c.bleu[0][i]}, {"bleu2", c.bleu[1][i]}, {"bleu3", c.bleu[2][i]},
                      {"bleu4", c.bleu[3][i]}, {"cider", c.cider[i]}};
  }
  return {{"bleu1", c.avg_bleu[0]}, {"bleu2", c.avg_bleu[1]}, {"bleu3", c.avg_bleu[2]},
          {"bleu4", c.avg_bleu[3]}, {"cider", c.avg_cider},   {"per_threshold", per}};
}

}  // namespace

EvalReport evaluate(const std::vector<VideoPrediction>& predictions,
                    const std::vector<const synth::SyntheticVideo*>& videos, bool per_video) {
  std::map<std::string, const VideoPrediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.video, &p).second) throw ContractViolation("dump lists video " + p.video + " twice");
  }
  std::set<std::string> known;
  for (const auto* v : videos) known.insert(v->id);
  for (const auto& [id, p] : by_id) {
    if (!known.count(id)) throw ContractViolation("dump references video " + id + " which is not in the split");
  }
  // Score in corpus order so the result does not depend on dump row order.
  std::vector<std::vector<metrics::Captioned>> pred, gt;
  std::vector<std::vector<Interval>> pred_iv, gt_iv;
  EvalReport report;
  for (const auto* v : videos) {
    auto it = by_id.find(v->id);
    if (it == by_id.end()) throw ContractViolation("dump has no record for video " + v->id);
    pred.push_back(predicted_captions(*it->second));
    gt.push_back(gt_captioned(*v));
    pred_iv.push_back(intervals(pred.back()));
    gt_iv.push_back(intervals(gt.back()));
    report.mean_predicted += static_cast<double>(pred.back().size());
    report.mean_gt += static_cast<double>(gt.back().size());
  }
  report.videos = videos.size();
  if (!videos.empty()) {
    report.mean_predicted /= static_cast<double>(videos.size());
    report.mean_gt /= static_cast<double>(videos.size());
  }
  const auto scorer = caption_scorer(videos);
  report.detection = metrics::detection_scores(pred_iv, gt_iv);
  report.captions = metrics::dense_caption_scores(pred, gt, scorer);
  if (per_video) {
    for (std::size_t i = 0; i < videos.size(); ++i) {
      VideoReport r;
      r.video = videos[i]->id;
      r.predicted = pred[i].size();
      r.gt = gt[i].size();
      r.detection = metrics::detection_scores({pred_iv[i]}, {gt_iv[i]});
      r.captions = metrics::dense_caption_scores({pred[i]}, {gt[i]}, scorer);
      report.per_video.push_back(std::move(r));
    }
  }
  return report;
}

std::string report_to_json(const EvalReport& r) {
  json j = {{"videos", r.videos},
            {"matching", "many-to-one"},
            {"mean_predicted_events", r.mean_predicted},
            {"mean_gt_events", r.mean_gt},
            {"detection", detection_json(r.detection)},
            {"captions", caption_json(r.captions)}};
  if (!r.per_video.empty()) {
    json rows = json::array();
    for (const auto& v : r.per_video) {
      rows.push_back({{"video", v.video},
                      {"predicted", v.predicted},
                      {"gt", v.gt},
                      {"detection", detection_json(v.detection)},
                      {"captions", caption_json(v.captions)}});
    }
    j["per_video"] = rows;
  }
  return j.dump(2) + "\n";
}

std::string captions_dump(const std::vector<VideoPrediction>& predictions, const synth::Vocabulary& vocab) {
  std::string out;
  for (const auto& p : predictions) {
    json events = json::array();
    for (const auto& e : p.events) {
      events.push_back({{"order", e.order},
                        {"start", e.interval.start},
                        {"end", e.interval.end},
                        {"score", e.score},
                        {"tokens", e.caption},
                        {"text", vocab.decode(e.caption)}});
    }
    out += json{{"video", p.video}, {"events", events}}.dump() + "\n";
  }
  return out;
}

std::string candidates_dump(const std::vector<VideoPrediction>& predictions) {
  std::string out;
  for (const auto& p : predictions) {
    json cands = json::array();
    for (const auto& c : p.candidates) {
      cands.push_back({{"start", c.interval.start}, {"end", c.interval.end}, {"score", c.score}});
    }
    out += json{{"video", p.video}, {"candidates", cands}}.dump() + "\n";
  }
  return out;
}

void write_dumps(const std::filesystem::path& dir, const std::vector<VideoPrediction>& predictions,
                 const synth::Vocabulary& vocab) {
  util::write_file((dir / "candidates.jsonl").string(), candidates_dump(predictions));
  util::write_file((dir / "captions.jsonl").string(), captions_dump(predictions, vocab));
}

namespace {

template <typename Fn>
void for_each_record(const std::string& text, const std::string& name, Fn fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(name + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<VideoPrediction> read_dumps(const std::filesystem::path& dir) {
  const auto captions_path = dir / "captions.jsonl";
  if (!std::filesystem::exists(captions_path)) {
    throw MissingPrerequisite("no caption dump at " + captions_path.string() + "; run generate first");
  }
  std::vector<VideoPrediction> out;
  std::map<std::string, std::size_t> index;
  for_each_record(util::read_file(captions_path.string()), captions_path.string(), [&](const json& j) {
    VideoPrediction p;
    p.video = j.at("video").get<std::string>();
    for (const auto& e : j.at("events")) {
      p.events.push_back({e.at("order").get<int>(),
                          {e.at("start").get<int>(), e.at("end").get<int>()},
                          e.at("score").get<double>(),
                          e.at("tokens").get<synth::CaptionTokens>()});
    }
    std::sort(p.events.begin(), p.events.end(), [](auto& a, auto& b) { return a.order < b.order; });
    index[p.video] = out.size();
    out.push_back(std::move(p));
  });
  const auto cand_path = dir / "candidates.jsonl";
  if (std::filesystem::exists(cand_path)) {
    for_each_record(util::read_file(cand_path.string()), cand_path.string(), [&](const json& j) {
      auto it = index.find(j.at("video").get<std::string>());
      if (it == index.end()) return;
      auto& cands = out[it->second].candidates;
      for (const auto& c : j.at("candidates")) {
        epn::Proposal p;
        p.interval = {c.at("start").get<int>(), c.at("end").get<int>()};
        p.score = c.at("score").get<double>();
        cands.push_back(std::move(p));
      }
    });
  }
  return out;
}

}  // namespace densecap::pipeline

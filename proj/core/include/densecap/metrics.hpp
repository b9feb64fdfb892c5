#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <vector>

#include "densecap/interval.hpp"
#include "densecap/synth/corpus.hpp"

namespace densecap::metrics {

inline constexpr std::array<double, 4> kThresholds{0.3, 0.5, 0.7, 0.9};

using Tokens = std::vector<int>;

// Word tokens only: drops PAD/BOS and everything from the first EOS on.
Tokens content_tokens(const synth::CaptionTokens& caption);

struct DetectionScore {
  std::vector<double> thresholds;
  std::vector<double> recall;     // per threshold
  std::vector<double> precision;  // per threshold
  double avg_recall = 0.0;
  double avg_precision = 0.0;
};

// Recall: fraction of GT events hit by some prediction with tIoU >= θ.
// Precision: fraction of predictions hitting some GT event. Averaged over
// videos, then thresholds. A video without predictions has precision 0; a
// video without GT events has recall 1.
DetectionScore detection_scores(const std::vector<std::vector<Interval>>& predicted,
                                const std::vector<std::vector<Interval>>& gt,
                                const std::vector<double>& thresholds = {kThresholds.begin(), kThresholds.end()});

// Sentence BLEU@N: geometric mean of clipped n-gram precisions times the
// brevity penalty against the closest reference length (ties to the shorter).
// No smoothing; an empty candidate or any zero precision scores 0.
double bleu(const Tokens& candidate, const std::vector<Tokens>& references, int n);

// CIDEr (no length penalty). Document frequencies come from a fixed corpus of
// reference documents; idf(g) = ln(N / max(1, df(g))).
class CiderScorer {
 public:
  static constexpr int kMaxN = 4;

  explicit CiderScorer(const std::vector<Tokens>& documents);

  std::size_t num_documents() const noexcept { return num_docs_; }
  double idf(const Tokens& ngram) const;
  // In [0, 10]; zero-norm vectors contribute cosine 0.
  double score(const Tokens& candidate, const std::vector<Tokens>& references) const;

 private:
  std::size_t num_docs_;
  std::map<Tokens, std::size_t> df_;
};

struct CaptionScore {
  std::vector<double> thresholds;
  // bleu[n-1][i] is BLEU@n at thresholds[i].
  std::array<std::vector<double>, 4> bleu;
  std::vector<double> cider;
  std::array<double, 4> avg_bleu{};
  double avg_cider = 0.0;
};

struct Captioned {
  Interval interval;
  synth::CaptionTokens caption;
};

// For each θ: every prediction is scored against the GT captions of events
// with tIoU >= θ (0 when none); a video scores the mean over its predictions
// (0 without predictions); the corpus scores the mean over videos.
CaptionScore dense_caption_scores(const std::vector<std::vector<Captioned>>& predictions,
                                  const std::vector<std::vector<Captioned>>& gt, const CiderScorer& cider,
                                  const std::vector<double>& thresholds = {kThresholds.begin(),
                                                                           kThresholds.end()});

}  // namespace densecap::metrics

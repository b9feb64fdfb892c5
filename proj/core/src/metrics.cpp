#include "densecap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

namespace densecap::metrics {

Tokens content_tokens(const synth::CaptionTokens& caption) {
  Tokens out;
  for (int t : caption) {
    if (t == synth::kEos) break;
    if (t == synth::kPad || t == synth::kBos) continue;
    out.push_back(t);
  }
  return out;
}

DetectionScore detection_scores(const std::vector<std::vector<Interval>>& predicted,
                                const std::vector<std::vector<Interval>>& gt,
                                const std::vector<double>& thresholds) {
  if (predicted.size() != gt.size()) {
    throw std::invalid_argument("detection_scores: prediction and GT video counts differ");
  }
  DetectionScore out;
  out.thresholds = thresholds;
  for (double theta : thresholds) {
    double rec_sum = 0.0, prec_sum = 0.0;
    for (std::size_t v = 0; v < gt.size(); ++v) {
      const auto& p = predicted[v];
      const auto& g = gt[v];
      auto hit = [&](const Interval& a, const std::vector<Interval>& pool) {
        return std::any_of(pool.begin(), pool.end(), [&](const Interval& b) { return tiou(a, b) >= theta; });
      };
      if (g.empty()) {
        rec_sum += 1.0;
      } else {
        rec_sum += static_cast<double>(std::count_if(g.begin(), g.end(), [&](auto& e) { return hit(e, p); })) /
                   static_cast<double>(g.size());
      }
      if (!p.empty()) {
        prec_sum += static_cast<double>(std::count_if(p.begin(), p.end(), [&](auto& e) { return hit(e, g); })) /
                    static_cast<double>(p.size());
      }
    }
    const double n = gt.empty() ? 1.0 : static_cast<double>(gt.size());
    out.recall.push_back(gt.empty() ? 0.0 : rec_sum / n);
    out.precision.push_back(gt.empty() ? 0.0 : prec_sum / n);
  }
  if (!thresholds.empty()) {
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      out.avg_recall += out.recall[i];
      out.avg_precision += out.precision[i];
    }
    out.avg_recall /= static_cast<double>(thresholds.size());
    out.avg_precision /= static_cast<double>(thresholds.size());
  }
  return out;
}

namespace {

std::map<Tokens, int> ngram_counts(const Tokens& tokens, int n) {
  std::map<Tokens, int> counts;
  const auto len = static_cast<int>(tokens.size());
  for (int i = 0; i + n <= len; ++i) ++counts[Tokens(tokens.begin() + i, tokens.begin() + i + n)];
  return counts;
}

}  // namespace

double bleu(const Tokens& candidate, const std::vector<Tokens>& references, int n) {
  if (n < 1 || n > 4) throw std::invalid_argument("bleu: N must be in [1, 4]");
  if (candidate.empty() || references.empty()) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    const auto cand = ngram_counts(candidate, k);
    std::map<Tokens, int> max_ref;
    for (const auto& ref : references) {
      for (const auto& [g, c] : ngram_counts(ref, k)) max_ref[g] = std::max(max_ref[g], c);
    }
    int clipped = 0, total = 0;
    for (const auto& [g, c] : cand) {
      total += c;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(c, it->second);
    }
    if (clipped == 0) return 0.0;
    log_sum += std::log(static_cast<double>(clipped) / total);
  }
  const auto c = static_cast<long>(candidate.size());
  long r = static_cast<long>(references.front().size());
  for (const auto& ref : references) {
    const auto len = static_cast<long>(ref.size());
    if (std::labs(len - c) < std::labs(r - c) || (std::labs(len - c) == std::labs(r - c) && len < r)) r = len;
  }
  const double bp = c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return bp * std::exp(log_sum / n);
}

CiderScorer::CiderScorer(const std::vector<Tokens>& documents) : num_docs_(documents.size()) {
  if (documents.empty()) throw std::invalid_argument("CiderScorer: empty reference corpus for IDF");
  for (const auto& doc : documents) {
    for (int k = 1; k <= kMaxN; ++k) {
      for (const auto& entry : ngram_counts(doc, k)) ++df_[entry.first];
    }
  }
}

double CiderScorer::idf(const Tokens& ngram) const {
  auto it = df_.find(ngram);
  const double df = it == df_.end() ? 1.0 : static_cast<double>(std::max<std::size_t>(1, it->second));
  return std::log(static_cast<double>(num_docs_) / df);
}

double CiderScorer::score(const Tokens& candidate, const std::vector<Tokens>& references) const {
  if (references.empty()) return 0.0;
  double total = 0.0;
  for (int k = 1; k <= kMaxN; ++k) {
    auto weigh = [&](const Tokens& tokens) {
      std::map<Tokens, double> vec;
      for (const auto& [g, c] : ngram_counts(tokens, k)) {
        const double w = c * idf(g);
        if (w != 0.0) vec[g] = w;
      }
      return vec;
    };
    auto norm = [](const std::map<Tokens, double>& v) {
      double s = 0.0;
      for (const auto& e : v) s += e.second * e.second;
      return std::sqrt(s);
    };
    const auto cand = weigh(candidate);
    const double cn = norm(cand);
    double sim = 0.0;
    for (const auto& ref : references) {
      const auto rv = weigh(ref);
      const double rn = norm(rv);
      if (cn == 0.0 || rn == 0.0) continue;
      double d = 0.0;
      for (const auto& [g, w] : cand) {
        auto it = rv.find(g);
        if (it != rv.end()) d += w * it->second;
      }
      sim += std::clamp(d / (cn * rn), 0.0, 1.0);
    }
    total += sim / static_cast<double>(references.size());
  }
  return 10.0 * total / kMaxN;
}

CaptionScore dense_caption_scores(const std::vector<std::vector<Captioned>>& predictions,
                                  const std::vector<std::vector<Captioned>>& gt, const CiderScorer& cider,
                                  const std::vector<double>& thresholds) {
  if (predictions.size() != gt.size()) {
    throw std::invalid_argument("dense_caption_scores: prediction and GT video counts differ");
  }
  CaptionScore out;
  out.thresholds = thresholds;
  const double videos = static_cast<double>(std::max<std::size_t>(1, gt.size()));
  for (double theta : thresholds) {
    std::array<double, 4> b{};
    double c = 0.0;
    for (std::size_t v = 0; v < gt.size(); ++v) {
      if (predictions[v].empty()) continue;
      std::array<double, 4> vb{};
      double vc = 0.0;
      for (const auto& pred : predictions[v]) {
        std::vector<Tokens> refs;
        for (const auto& e : gt[v]) {
          if (tiou(pred.interval, e.interval) >= theta) refs.push_back(content_tokens(e.caption));
        }
        if (refs.empty()) continue;
        const Tokens cand = content_tokens(pred.caption);
        for (int n = 1; n <= 4; ++n) vb[n - 1] += bleu(cand, refs, n);
        vc += cider.score(cand, refs);
      }
      const double np = static_cast<double>(predictions[v].size());
      for (int n = 0; n < 4; ++n) b[n] += vb[n] / np;
      c += vc / np;
    }
    for (int n = 0; n < 4; ++n) out.bleu[n].push_back(b[n] / videos);
    out.cider.push_back(c / videos);
  }
  if (!thresholds.empty()) {
    const double k = static_cast<double>(thresholds.size());
    for (int n = 0; n < 4; ++n) {
      for (double x : out.bleu[n]) out.avg_bleu[n] += x / k;
    }
    for (double x : out.cider) out.avg_cider += x / k;
  }
  return out;
}

}  // namespace densecap::metrics

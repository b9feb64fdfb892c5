#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

using densecap::Interval;
using densecap::nn::ParamStore;
using densecap::nn::Tensor;

namespace oracle {

Vec from(const Tensor& t) { return Vec(t.data().begin(), t.data().end()); }

Vec row_of(const Tensor& m, std::size_t r) {
  auto row = m.row(r);
  return Vec(row.begin(), row.end());
}

Vec cat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Real sigm(Real x) { return 1.0L / (1.0L + std::exp(-x)); }

Vec matvec_rows(const Tensor& w, std::size_t r0, std::size_t n, const Vec& x) {
  Vec y(n, 0.0L);
  for (std::size_t r = 0; r < n; ++r) {
    Real acc = 0.0L;
    for (std::size_t c = 0; c < w.cols(); ++c) acc += static_cast<Real>(w.at(r0 + r, c)) * x[c];
    y[r] = acc;
  }
  return y;
}

Vec matvec(const Tensor& w, const Vec& x) { return matvec_rows(w, 0, w.rows(), x); }

namespace {

const Tensor& P(const ParamStore& s, const std::string& name) { return s.at(name).value; }

Real bias(const Tensor& b, std::size_t i) { return static_cast<Real>(b[i]); }

}  // namespace

Vec gru(const ParamStore& s, const std::string& prefix, const Vec& x, const Vec& h) {
  const Tensor& wi = P(s, prefix + ".w_ih");
  const Tensor& wh = P(s, prefix + ".w_hh");
  const Tensor& bi = P(s, prefix + ".b_ih");
  const Tensor& bh = P(s, prefix + ".b_hh");
  const std::size_t H = h.size();
  Vec out(H);
  const Vec ix = matvec(wi, x), hx = matvec(wh, h);
  for (std::size_t j = 0; j < H; ++j) {
    const Real z = sigm(ix[j] + bias(bi, j) + hx[j] + bias(bh, j));
    const Real r = sigm(ix[H + j] + bias(bi, H + j) + hx[H + j] + bias(bh, H + j));
    const Real n = std::tanh(ix[2 * H + j] + bias(bi, 2 * H + j) + r * (hx[2 * H + j] + bias(bh, 2 * H + j)));
    out[j] = (1.0L - z) * n + z * h[j];
  }
  return out;
}

std::pair<Vec, Vec> lstm(const ParamStore& s, const std::string& prefix, const Vec& x, const Vec& h, const Vec& c) {
  const Tensor& wi = P(s, prefix + ".w_ih");
  const Tensor& wh = P(s, prefix + ".w_hh");
  const Tensor& b = P(s, prefix + ".bias");
  const std::size_t H = h.size();
  const Vec ix = matvec(wi, x), hx = matvec(wh, h);
  Vec h2(H), c2(H);
  for (std::size_t j = 0; j < H; ++j) {
    const Real i = sigm(ix[j] + hx[j] + bias(b, j));
    const Real f = sigm(ix[H + j] + hx[H + j] + bias(b, H + j));
    const Real g = std::tanh(ix[2 * H + j] + hx[2 * H + j] + bias(b, 2 * H + j));
    const Real o = sigm(ix[3 * H + j] + hx[3 * H + j] + bias(b, 3 * H + j));
    c2[j] = f * c[j] + i * g;
    h2[j] = o * std::tanh(c2[j]);
  }
  return {h2, c2};
}

EpnOut epn(const ParamStore& s, const Tensor& segments) {
  const std::size_t H = P(s, "epn.gru1.w_hh").cols();
  Vec h1(H, 0.0L), h2(H, 0.0L);
  EpnOut out;
  const Tensor& w = P(s, "epn.out.w");
  const Tensor& b = P(s, "epn.out.b");
  for (std::size_t t = 0; t < segments.rows(); ++t) {
    h1 = gru(s, "epn.gru1", row_of(segments, t), h1);
    h2 = gru(s, "epn.gru2", h1, h2);
    Vec l = matvec(w, h2);
    for (std::size_t k = 0; k < l.size(); ++k) l[k] += bias(b, k);
    out.logits.push_back(l);
    out.hidden.push_back(h2);
  }
  return out;
}

Real tiou(Interval a, Interval b) {
  // Count covered segments directly.
  const int lo = std::min(a.start, b.start), hi = std::max(a.end, b.end);
  int inter = 0, uni = 0;
  for (int t = lo; t <= hi; ++t) {
    const bool in_a = t >= a.start && t <= a.end;
    const bool in_b = t >= b.start && t <= b.end;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return uni == 0 ? 0.0L : static_cast<Real>(inter) / uni;
}

Real epn_loss(const ParamStore& s, const Tensor& segments, const std::vector<Interval>& gt, int K) {
  const auto out = epn(s, segments);
  const int T = static_cast<int>(segments.rows());
  std::vector<std::pair<Real, int>> terms;  // (logit, label)
  int pos = 0, neg = 0;
  for (int t = 0; t < T; ++t) {
    for (int k = 0; k < K; ++k) {
      if (t - k < 0) continue;
      int y = 0;
      for (const auto& g : gt) {
        if (oracle::tiou({t - k, t}, g) > 0.5L) y = 1;
      }
      (y ? pos : neg) += 1;
      terms.emplace_back(out.logits[t][k], y);
    }
  }
  Real wpos = pos == 0 ? 1.0L : std::clamp(static_cast<Real>(neg) / pos, 1.0L, 100.0L);
  Real loss = 0.0L;
  for (auto [l, y] : terms) {
    const Real p = sigm(l);
    loss += y ? -wpos * std::log(p) : -std::log(1.0L - p);
  }
  return loss;
}

Vec loc_mask(Interval iv, int T, int L) {
  // Enumerate every valid window with the required count and keep the one
  // whose centre is nearest the interval centre in bin units (ties to the
  // later window).
  // Distances compared as integers scaled by T (count) and 2T (centre).
  const long want = static_cast<long>(L) * (iv.end - iv.start + 1);
  int count = 1;
  for (int c = 1; c <= L; ++c) {
    const long dc = std::abs(c * static_cast<long>(T) - want), db = std::abs(count * static_cast<long>(T) - want);
    if (dc < db || (dc == db && c > count)) count = c;
  }
  const long centre2 = static_cast<long>(iv.start + iv.end + 1) * L;
  int first = 0;
  long best = -1;
  for (int f = 0; f + count <= L; ++f) {
    const long d = std::abs((2L * f + count) * T - centre2);
    if (best < 0 || d <= best) {
      best = d;
      first = f;
    }
  }
  Vec m(static_cast<std::size_t>(L), 0.0L);
  for (int i = first; i < first + count; ++i) m[static_cast<std::size_t>(i)] = 1.0L;
  return m;
}

Vec esgn_encode(const ParamStore& s, const std::vector<Cand>& cands) {
  const std::size_t H = P(s, "esgn.enc.w_hh").cols();
  Vec h(H, 0.0L);
  for (const auto& c : cands) h = gru(s, "esgn.enc", c.vis, h);
  return h;
}

Vec esgn_logits(const ParamStore& s, const std::vector<Cand>& cands, int T, int L, const Vec& h) {
  const Tensor& w1 = P(s, "esgn.att.w_embed");
  const Tensor& w2 = P(s, "esgn.att.w_hidden");
  const Tensor& b = P(s, "esgn.att.b");
  const Tensor& v = P(s, "esgn.att.v");
  const Real c = P(s, "esgn.att.b_out")[0];
  std::vector<Vec> us{from(P(s, "esgn.end"))};
  for (const auto& cd : cands) us.push_back(cat(loc_mask(cd.iv, T, L), cd.vis));
  const Vec q = matvec(w2, h);
  Vec out;
  for (const auto& u : us) {
    const Vec p = matvec(w1, u);
    Real acc = c;
    for (std::size_t a = 0; a < p.size(); ++a) acc += static_cast<Real>(v[a]) * std::tanh(p[a] + q[a] + bias(b, a));
    out.push_back(acc);
  }
  return out;
}

Real esgn_loss(const ParamStore& s, const std::vector<Cand>& cands, const std::vector<Interval>& gt_in, int T, int L) {
  std::vector<Interval> gt = gt_in;
  std::sort(gt.begin(), gt.end(), [](Interval a, Interval b) {
    return a.start != b.start ? a.start < b.start : a.end < b.end;
  });
  Vec h = esgn_encode(s, cands);
  Vec c(h.size(), 0.0L);
  Vec input = from(P(s, "esgn.start"));
  Real loss = 0.0L;
  for (std::size_t n = 0; n <= gt.size(); ++n) {
    std::tie(h, c) = lstm(s, "esgn.ptr", input, h, c);
    const Vec logits = esgn_logits(s, cands, T, L, h);
    for (std::size_t j = 0; j < logits.size(); ++j) {
      Real target = 0.0L;
      if (n < gt.size()) {
        target = j == 0 ? 0.0L : oracle::tiou(cands[j - 1].iv, gt[n]);
      } else {
        target = j == 0 ? 1.0L : 0.0L;
      }
      const Real a = sigm(logits[j]);
      loss -= target * std::log(a) + (1.0L - target) * std::log(1.0L - a);
    }
    if (n < gt.size()) {
      std::size_t best = 0;
      Real best_iou = -1.0L;
      for (std::size_t m = 0; m < cands.size(); ++m) {
        const Real v = oracle::tiou(cands[m].iv, gt[n]);
        if (v > best_iou) {
          best_iou = v;
          best = m;
        }
      }
      input = cat(loc_mask(cands[best].iv, T, L), cands[best].vis);
    }
  }
  return loss;
}

Tda tda(const ParamStore& s, const Tensor& seg, const Vec& vis, const Vec& h) {
  const Tensor& wa = P(s, "scn.tda.w_alpha");
  const Tensor& wc = P(s, "scn.tda.w_c");
  const Tensor& wv = P(s, "scn.tda.w_v");
  const Tensor& wh = P(s, "scn.tda.w_h");
  const Vec pv = matvec(wv, vis), ph = matvec(wh, h);
  Vec alpha;
  for (std::size_t i = 0; i < seg.rows(); ++i) {
    const Vec pc = matvec(wc, row_of(seg, i));
    Real acc = 0.0L;
    for (std::size_t a = 0; a < pc.size(); ++a) acc += static_cast<Real>(wa[a]) * std::tanh(pc[a] + pv[a] + ph[a]);
    alpha.push_back(acc);
  }
  const Real mx = *std::max_element(alpha.begin(), alpha.end());
  Real z = 0.0L;
  for (auto a : alpha) z += std::exp(a - mx);
  Tda out;
  out.z.assign(seg.cols(), 0.0L);
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    out.weights.push_back(std::exp(alpha[i] - mx) / z);
    for (std::size_t d = 0; d < seg.cols(); ++d) out.z[d] += out.weights.back() * static_cast<Real>(seg.at(i, d));
  }
  return out;
}

Gate gate(const ParamStore& s, const Vec& z, const Vec& vis, const Vec& x, const Vec& h) {
  Vec zb = matvec(P(s, "scn.cg.w_z"), z);
  Vec vb = matvec(P(s, "scn.cg.w_vbar"), vis);
  for (auto& v : zb) v = std::tanh(v);
  for (auto& v : vb) v = std::tanh(v);
  Vec k = matvec(P(s, "scn.cg.w_k"), cat(cat(zb, vb), cat(x, h)));
  for (auto& v : k) v = sigm(v);
  Gate g;
  g.k = k;
  for (std::size_t i = 0; i < k.size(); ++i) g.o.push_back((1.0L - k[i]) * zb[i]);
  for (std::size_t i = 0; i < k.size(); ++i) g.o.push_back(k[i] * vb[i]);
  return g;
}

Real scn_nll(const ParamStore& s, const std::vector<ScnEvent>& events) {
  const std::size_t H = P(s, "scn.episode.w_hh").cols();
  const Tensor& wemb = P(s, "scn.wemb");
  const Tensor& wp = P(s, "scn.out.w");
  const Tensor& bp = P(s, "scn.out.b");
  Vec r(H, 0.0L), rc(H, 0.0L), g(H, 0.0L);
  Real nll = 0.0L;
  for (const auto& ev : events) {
    std::tie(r, rc) = lstm(s, "scn.episode", cat(ev.vis, g), r, rc);
    Vec h = r, c(H, 0.0L);
    int prev = 1;  // BOS
    for (int tok : ev.caption) {
      const Vec x = row_of(wemb, static_cast<std::size_t>(prev));
      const auto att = tda(s, ev.seg, ev.vis, h);
      const auto gt = gate(s, att.z, ev.vis, x, h);
      std::tie(h, c) = lstm(s, "scn.event", cat(gt.o, x), h, c);
      Vec logits = matvec(wp, h);
      for (std::size_t v = 0; v < logits.size(); ++v) logits[v] += bias(bp, v);
      const Real mx = *std::max_element(logits.begin(), logits.end());
      Real z = 0.0L;
      for (auto l : logits) z += std::exp(l - mx);
      nll += mx + std::log(z) - logits[static_cast<std::size_t>(tok)];
      prev = tok;
    }
    g = h;
  }
  return nll;
}

}  // namespace oracle

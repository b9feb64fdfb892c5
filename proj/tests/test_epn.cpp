#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "densecap/epn.hpp"
#include "densecap/error.hpp"
#include "densecap/rng.hpp"
#include "support/bruteforce.hpp"
#include "support/gradcheck.hpp"
#include "support/oracle.hpp"

using namespace densecap;
using namespace densecap::epn;
using nn::Tensor;

namespace {

Tensor random_segments(int t_c, int d, Rng& rng) {
  Tensor t({static_cast<std::size_t>(t_c), static_cast<std::size_t>(d)});
  for (auto& v : t.data()) v = rng.uniform(-1.0, 1.0);
  return t;
}

synth::SyntheticVideo make_video(Tensor segments, std::vector<Interval> events) {
  synth::SyntheticVideo v;
  v.id = "v";
  v.segments = std::move(segments);
  for (auto iv : events) v.events.push_back({iv, {3, synth::kEos}, 0});
  return v;
}

struct Fixture {
  nn::ParamStore store;
  EpnConfig cfg;
  EpnModel model;
  Fixture(int hidden, int K, int d, std::uint64_t seed, double range = 0.5)
      : cfg(make_cfg(hidden, K)), model(declared(store, cfg, d, seed, range), cfg) {}

  static EpnConfig make_cfg(int hidden, int K) {
    EpnConfig c;
    c.hidden = hidden;
    c.K = K;
    return c;
  }
  static nn::ParamStore& declared(nn::ParamStore& s, EpnConfig& c, int d, std::uint64_t seed, double range) {
    Rng rng(seed);
    c.init_range = range;
    EpnModel::declare(s, c, static_cast<std::size_t>(d), rng);
    return s;
  }
};

}  // namespace

TEST(Tiou, HandExamples) {
  EXPECT_EQ(tiou({3, 7}, {3, 7}), 1.0);
  EXPECT_EQ(tiou({0, 4}, {10, 14}), 0.0);
  EXPECT_NEAR(tiou({0, 9}, {5, 14}), 5.0 / 15.0, 1e-15);
}

TEST(Tiou, PropertiesAgainstCountingOracle) {
  Rng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const int a0 = rng.uniform_int(0, 30), b0 = rng.uniform_int(0, 30);
    const Interval a{a0, a0 + rng.uniform_int(0, 10)}, b{b0, b0 + rng.uniform_int(0, 10)};
    const double t = tiou(a, b);
    EXPECT_NEAR(t, static_cast<double>(oracle::tiou(a, b)), 1e-15);
    EXPECT_EQ(t, tiou(b, a));
    EXPECT_GE(t, 0.0);
    EXPECT_LE(t, 1.0);
    EXPECT_EQ(t == 1.0, a == b);
    EXPECT_EQ(t == 0.0, a.end < b.start || b.end < a.start);
  }
}

TEST(EpnScore, SingleSegmentValidity) {
  Fixture f(4, 3, 2, 1);
  Rng rng(2);
  const auto s = score_proposals(f.model, random_segments(1, 2, rng));
  EXPECT_TRUE(s.is_valid(0, 0));
  EXPECT_FALSE(s.is_valid(0, 1));
  EXPECT_FALSE(s.is_valid(0, 2));
}

TEST(EpnScore, ZeroParamsGiveHalf) {
  Fixture f(4, 3, 2, 1, 0.0);
  Rng rng(2);
  const auto s = score_proposals(f.model, random_segments(6, 2, rng));
  for (double c : s.confidence.data()) EXPECT_EQ(c, 0.5);
}

TEST(EpnScore, FeatureWidthMismatchThrows) {
  Fixture f(4, 3, 2, 1);
  Rng rng(2);
  EXPECT_THROW(score_proposals(f.model, random_segments(5, 3, rng)), ShapeError);
}

TEST(EpnScore, MatchesScalarOracle) {
  for (int seed = 0; seed < 10; ++seed) {
    Fixture f(5, 3, 4, 10 + seed);
    Rng rng(seed);
    const Tensor seg = random_segments(5, 4, rng);
    const auto s = score_proposals(f.model, seg);
    const auto o = oracle::epn(f.store, seg);
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t k = 0; k < 3; ++k) {
        EXPECT_NEAR(s.confidence.at(t, k), static_cast<double>(oracle::sigm(o.logits[t][k])), 1e-13);
      }
      for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(s.hidden.at(t, j), static_cast<double>(o.hidden[t][j]), 1e-13);
    }
  }
}

TEST(EpnLabels, HandExamples) {
  Rng rng(3);
  const auto v = make_video(random_segments(8, 2, rng), {{2, 5}});
  const auto lab = label_proposals(v, 4);
  EXPECT_TRUE(lab.at(5, 3));   // [2,5]
  EXPECT_FALSE(lab.at(5, 1));  // [4,5] tIoU exactly 0.5
  EXPECT_EQ(lab.valid[0 * 4 + 1], 0);
}

TEST(EpnLabels, MatchBruteForce) {
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const int t_c = rng.uniform_int(3, 20);
    std::vector<Interval> evs;
    for (int e = 0; e < 3; ++e) {
      const int s = rng.uniform_int(0, t_c - 1);
      evs.push_back({s, std::min(t_c - 1, s + rng.uniform_int(0, 6))});
    }
    const auto v = make_video(random_segments(t_c, 1, rng), evs);
    const int K = rng.uniform_int(1, 8);
    const auto lab = label_proposals(v, K);
    const auto want = bruteforce::labels(t_c, K, evs);
    EXPECT_EQ(lab.y, want.y);
    EXPECT_EQ(lab.valid, want.valid);
  }
}

TEST(EpnLoss, MatchesOracleAndMasksInvalid) {
  for (int seed = 0; seed < 10; ++seed) {
    Fixture f(4, 4, 3, 30 + seed);
    Rng rng(seed);
    const auto v = make_video(random_segments(7, 3, rng), {{0, 2}, {3, 6}});
    nn::Tape tape(nn::Tape::Mode::kInference);
    const double got = epn_loss(tape, f.model, v).item();
    EXPECT_NEAR(got, static_cast<double>(oracle::epn_loss(f.store, v.segments, {{0, 2}, {3, 6}}, 4)), 1e-12);
  }
  // Invalid slots: arbitrarily large logits there change nothing.
  const auto lab = label_proposals(make_video(Tensor({3, 1}), {{0, 2}}), 3);
  nn::Tape tape(nn::Tape::Mode::kInference);
  Tensor a({9}), b({9});
  for (std::size_t i = 0; i < 9; ++i) {
    a[i] = 0.1 * static_cast<double>(i);
    b[i] = lab.valid[i] ? a[i] : 1e6 * (i % 2 ? 1 : -1);
  }
  EXPECT_EQ(epn_loss_from_logits(tape.constant(a), lab).item(), epn_loss_from_logits(tape.constant(b), lab).item());
}

TEST(EpnLoss, PositiveWeightClamped) {
  ProposalLabels lab;
  lab.y = {1, 0, 0, 0};
  lab.valid = {1, 1, 1, 1};
  EXPECT_EQ(positive_weight(lab), 3.0);
  lab.y = {1, 1, 1, 0};
  EXPECT_EQ(positive_weight(lab), 1.0);
  lab.y.assign(300, 0);
  lab.valid.assign(300, 1);
  lab.y[0] = 1;
  EXPECT_EQ(positive_weight(lab), 100.0);
}

TEST(EpnLoss, GradientCheck) {
  for (int seed = 0; seed < 5; ++seed) {
    Fixture f(3, 3, 2, 50 + seed);
    Rng rng(seed);
    const auto v = make_video(random_segments(5, 2, rng), {{1, 3}});
    const auto r = testing_support::check_param_grads(f.store, [&](nn::Tape& t) { return epn_loss(t, f.model, v); });
    EXPECT_LT(r.max_rel_err, 1e-4) << r.worst;
  }
}

TEST(Nms, HandExamples) {
  EXPECT_TRUE(nms({}, 0.8, 32).empty());
  const Proposal p{{2, 4}, 0.5, {}};
  EXPECT_EQ(nms({p}, 0.8, 32), std::vector<Proposal>{p});
  const auto kept = nms({{{1, 3}, 0.8, {}}, {{1, 3}, 0.9, {}}}, 0.8, 32);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].score, 0.9);
}

TEST(Nms, MatchesBruteForce) {
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    std::vector<Proposal> ps;
    for (int j = 0; j < 20; ++j) {
      const int s = rng.uniform_int(0, 15);
      // Coarse scores force ties so the tie-break rule is exercised.
      ps.push_back({{s, s + rng.uniform_int(0, 5)}, rng.uniform_int(0, 5) / 5.0, {}});
    }
    const std::size_t cap = static_cast<std::size_t>(rng.uniform_int(1, 25));
    const auto got = nms(ps, 0.8, cap);
    EXPECT_EQ(got, bruteforce::nms(ps, 0.8, cap));
    for (std::size_t a = 0; a < got.size(); ++a) {
      for (std::size_t b = a + 1; b < got.size(); ++b) EXPECT_LE(tiou(got[a].interval, got[b].interval), 0.8);
    }
  }
}

TEST(Extract, TopNCapAndComposition) {
  Fixture f(4, 4, 3, 70);
  Rng rng(7);
  const auto v = make_video(random_segments(12, 3, rng), {{1, 4}});
  const auto scores = score_proposals(f.model, v);
  EXPECT_EQ(extract_candidates(scores, 1, 0.8, 32).size(), 1u);

  const auto got = extract_candidates(scores, 200, 0.8, 32);
  std::vector<Proposal> all;
  for (int t = 0; t < 12; ++t) {
    for (int k = 0; k < 4 && k <= t; ++k) {
      all.push_back({{t - k, t}, scores.confidence.at(static_cast<std::size_t>(t), static_cast<std::size_t>(k)), {}});
    }
  }
  auto expected = bruteforce::nms(all, 0.8, 32);
  ASSERT_EQ(got.size(), expected.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].interval, expected[i].interval);
    EXPECT_EQ(got[i].score, expected[i].score);
    const Tensor vis = got[i].vis;
    ASSERT_EQ(vis.size(), 8u);
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_EQ(vis[j], scores.hidden.at(static_cast<std::size_t>(got[i].interval.start), j));
      EXPECT_EQ(vis[4 + j], scores.hidden.at(static_cast<std::size_t>(got[i].interval.end), j));
    }
  }
}

TEST(Extract, ShortVideoDominantProposalSurvives) {
  Fixture f(2, 4, 1, 80, 0.0);
  // Bias the K=3 slot (length 3) so the whole 3-segment video wins.
  f.store.at("epn.out.b").value = Tensor::vector({-5, -5, 5, -5});
  const auto v = make_video(Tensor({3, 1}, 1.0), {{0, 2}});
  const auto c = extract_candidates(score_proposals(f.model, v), 200, 0.0, 32);
  ASSERT_FALSE(c.empty());
  const auto best = std::max_element(c.begin(), c.end(), [](auto& a, auto& b) { return a.score < b.score; });
  EXPECT_EQ(best->interval, (Interval{0, 2}));
}

#include <gtest/gtest.h>

#include <chrono>
#include <filesystem>
#include <set>

#include "densecap/error.hpp"
#include "densecap/synth/corpus.hpp"

using namespace densecap;
using namespace densecap::synth;

namespace {

CorpusSpec small_spec(int videos = 10) {
  CorpusSpec s;
  s.seed = 7;
  s.num_videos = videos;
  return s;
}

const Corpus& default_corpus() {
  static const Corpus c = generate_corpus(CorpusSpec{});
  return c;
}

}  // namespace

TEST(Synth, RegenerationIsByteIdentical) {
  const auto a = serialize_corpus(generate_corpus(small_spec()));
  const auto b = serialize_corpus(generate_corpus(small_spec()));
  EXPECT_EQ(a, b);
  auto other = small_spec();
  other.seed = 8;
  EXPECT_NE(a, serialize_corpus(generate_corpus(other)));
}

TEST(Synth, ZeroNoiseSingleTemplateMatchesTemplateMean) {
  CorpusSpec s = small_spec(3);
  s.noise = 0.0;
  s.num_templates = 1;
  s.min_events = s.max_events = 1;
  s.subject_strength = 0.0;
  const Corpus c = generate_corpus(s);
  const TemplateLibrary lib = make_templates(s);
  for (const auto& v : c.videos) {
    ASSERT_EQ(v.events.size(), 1u);
    const auto& ev = v.events[0];
    for (int t = ev.interval.start; t <= ev.interval.end; ++t) {
      for (std::size_t k = 0; k < v.feat_dim(); ++k) {
        EXPECT_EQ(v.segments.at(static_cast<std::size_t>(t), k), lib.means[0][k]);
      }
    }
  }
}

TEST(Synth, ZeroNoiseWithSubjectAddsAppearance) {
  CorpusSpec s = small_spec(3);
  s.noise = 0.0;
  s.num_templates = 1;
  s.min_events = s.max_events = 1;
  const Corpus c = generate_corpus(s);
  const TemplateLibrary lib = make_templates(s);
  for (const auto& v : c.videos) {
    const auto& ev = v.events[0];
    const auto t = static_cast<std::size_t>(ev.interval.start);
    for (std::size_t k = 0; k < v.feat_dim(); ++k) {
      EXPECT_EQ(v.segments.at(t, k), lib.means[0][k] + lib.appearance[v.subject][k]);
    }
  }
}

TEST(Synth, DefaultCorpusStatistics) {
  const auto st = corpus_stats(default_corpus());
  EXPECT_EQ(st.videos, 500u);
  EXPECT_GE(st.mean_events, 2.8);
  EXPECT_LE(st.mean_events, 3.2);
  EXPECT_GE(st.min_token_count, 10u);
  EXPECT_GT(st.overlap_fraction, 0.0);
}

TEST(Synth, VideoInvariants) {
  for (const auto& v : default_corpus().videos) {
    ASSERT_GE(v.num_segments(), 1);
    ASSERT_LE(v.num_segments(), CorpusSpec::kMaxSegments);
    ASSERT_FALSE(v.events.empty());
    for (std::size_t i = 0; i < v.events.size(); ++i) {
      const auto& ev = v.events[i];
      EXPECT_TRUE(ev.interval.well_formed());
      EXPECT_LT(ev.interval.end, v.num_segments());
      EXPECT_NO_THROW(validate_caption(ev.caption, default_corpus().vocab.size()));
      if (i > 0) EXPECT_LE(v.events[i - 1].interval.start, ev.interval.start);
    }
  }
}

TEST(Synth, SplitIsRoughlyEightyTwenty) {
  const auto& c = default_corpus();
  const auto train = select_split(c, Split::kTrain).size();
  const auto val = select_split(c, Split::kVal).size();
  EXPECT_EQ(train + val, c.videos.size());
  EXPECT_NEAR(static_cast<double>(val) / c.videos.size(), 0.2, 0.06);
  EXPECT_EQ(select_split(c, Split::kAll).size(), c.videos.size());
  EXPECT_THROW(parse_split("test"), ConfigError);
}

TEST(Synth, TooFewTemplatesIsConfigError) {
  CorpusSpec s = small_spec();
  s.num_templates = 2;
  s.max_events = 4;
  EXPECT_THROW(generate_corpus(s), ConfigError);
  s = small_spec();
  s.feat_dim = 0;
  try {
    generate_corpus(s);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("feat_dim"), std::string::npos);
  }
}

TEST(SynthIo, RoundTripPreservesEverything) {
  const Corpus c = generate_corpus(small_spec(25));
  const Corpus back = parse_corpus(serialize_corpus(c));
  EXPECT_EQ(back, c);
  const auto dir = std::filesystem::temp_directory_path() / "densecap_synth_test";
  std::filesystem::remove_all(dir);
  write_corpus(dir / "c.dcc", c);
  EXPECT_EQ(read_corpus(dir / "c.dcc"), c);
  std::filesystem::remove_all(dir);
}

TEST(SynthIo, MissingFeatureRowNamesTheVideo) {
  CorpusSpec s = small_spec(1);
  s.min_segments = s.max_segments = 10;
  s.min_events = s.max_events = 1;
  const Corpus c = generate_corpus(s);
  std::string text = serialize_corpus(c);
  const auto last_row = text.rfind("\nrow ");
  const auto eol = text.find('\n', last_row + 1);
  text.erase(last_row, eol - last_row);
  try {
    parse_corpus(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("declared T_c=10 but found 9 feature rows"), std::string::npos) << msg;
    EXPECT_NE(msg.find(c.videos[0].id), std::string::npos) << msg;
  }
}

TEST(SynthIo, TruncatedVersionAndTokenErrors) {
  const std::string text = serialize_corpus(generate_corpus(small_spec(2)));
  EXPECT_THROW(parse_corpus(text.substr(0, text.size() / 2)), ParseError);
  std::string bumped = text;
  bumped.replace(bumped.find(' ') + 1, 1, "9");
  EXPECT_THROW(parse_corpus(bumped), ParseError);
  // Replace the first caption token of the first event with an out-of-range index.
  std::string bad = text;
  const auto ev = bad.find("\nevent ");
  auto pos = ev + 1;
  for (int f = 0; f < 4; ++f) pos = bad.find(' ', pos) + 1;
  bad.insert(pos, "9999");
  try {
    parse_corpus(bad);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown token index"), std::string::npos) << e.what();
  }
}

TEST(SynthIo, DefaultCorpusRoundTripIsFast) {
  const Corpus& c = default_corpus();
  const auto t0 = std::chrono::steady_clock::now();
  const Corpus back = parse_corpus(serialize_corpus(c));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_EQ(back, c);
  EXPECT_LT(secs, 2.0);
  RecordProperty("round_trip_seconds", std::to_string(secs));
}

TEST(Vocabulary, ReservedTokensAndEncoding) {
  const auto& v = default_corpus().vocab;
  EXPECT_EQ(v.token(kPad), "<pad>");
  EXPECT_EQ(v.token(kBos), "<bos>");
  EXPECT_EQ(v.token(kEos), "<eos>");
  const auto ids = v.encode({v.token(3), v.token(4)});
  EXPECT_EQ(ids, (CaptionTokens{3, 4, kEos}));
  EXPECT_EQ(v.decode(ids), v.token(3) + " " + v.token(4));
  EXPECT_THROW(v.id("zzz-not-a-word"), std::out_of_range);
  EXPECT_THROW(validate_caption({3, kPad, kEos}, v.size()), std::invalid_argument);
  EXPECT_THROW(validate_caption({3, 4}, v.size()), std::invalid_argument);
  EXPECT_THROW(validate_caption({kEos}, v.size()), std::invalid_argument);
}

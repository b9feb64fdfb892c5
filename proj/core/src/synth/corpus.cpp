#include "densecap/synth/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "densecap/error.hpp"
#include "densecap/rng.hpp"
#include "densecap/util/bytes.hpp"
#include "synth/grammar.hpp"

namespace densecap::synth {

// ---------------------------------------------------------------- captions

void validate_caption(const CaptionTokens& ids, std::size_t vocab_size) {
  if (ids.size() < 2) throw std::invalid_argument("caption needs at least one word before EOS");
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
      throw std::invalid_argument("caption token id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(vocab_size));
    }
    const bool last = i + 1 == ids.size();
    if (last != (id == kEos)) throw std::invalid_argument("caption must end with exactly one EOS");
    if (id == kPad || id == kBos) throw std::invalid_argument("caption contains PAD/BOS");
  }
}

// -------------------------------------------------------------- vocabulary

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  std::vector<std::string> tokens{"<pad>", "<bos>", "<eos>"};
  for (auto& w : words) {
    if (w == "<pad>" || w == "<bos>" || w == "<eos>") {
      throw std::invalid_argument("reserved token in word list: " + w);
    }
    tokens.push_back(std::move(w));
  }
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 3 || tokens[0] != "<pad>" || tokens[1] != "<bos>" || tokens[2] != "<eos>") {
    throw ParseError("vocabulary must start with <pad> <bos> <eos>");
  }
  Vocabulary v;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!v.index_.emplace(tokens[i], static_cast<int>(i)).second) {
      throw ParseError("duplicate vocabulary token: " + tokens[i]);
    }
  }
  v.tokens_ = std::move(tokens);
  return v;
}

int Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw std::out_of_range("unknown token: " + std::string(token));
  return it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[id];
}

CaptionTokens Vocabulary::encode(const std::vector<std::string>& words) const {
  CaptionTokens ids;
  ids.reserve(words.size() + 1);
  for (const auto& w : words) ids.push_back(id(w));
  ids.push_back(kEos);
  return ids;
}

std::string Vocabulary::decode(const CaptionTokens& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!out.empty()) out += ' ';
    out += token(id);
  }
  return out;
}

std::uint64_t Vocabulary::fingerprint() const {
  std::string joined;
  for (const auto& t : tokens_) joined += t + '\n';
  return fnv1a64(joined);
}

const SyntheticVideo* Corpus::find(std::string_view id) const {
  for (const auto& v : videos) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

// ----------------------------------------------------------------- spec

void CorpusSpec::validate() const {
  auto require = [](bool ok, const char* field, const std::string& why) {
    if (!ok) throw ConfigError(std::string("corpus.") + field + ": " + why);
  };
  require(num_videos > 0, "num_videos", "must be positive");
  require(feat_dim > 0, "feat_dim", "must be positive");
  require(min_segments > 0, "min_segments", "must be positive");
  require(max_segments >= min_segments, "max_segments", "must be >= min_segments");
  require(max_segments <= kMaxSegments, "max_segments",
          "must be <= " + std::to_string(kMaxSegments));
  require(min_events > 0, "min_events", "must be positive");
  require(max_events >= min_events, "max_events", "must be >= min_events");
  require(num_templates > 0, "num_templates", "must be positive");
  require(static_cast<std::size_t>(num_templates) <= grammar::actions().size(), "num_templates",
          "template library holds only " + std::to_string(grammar::actions().size()) + " actions");
  require(num_templates >= max_events, "num_templates",
          "template library smaller than the requested event diversity (max_events)");
  require(min_event_len > 0, "min_event_len", "must be positive");
  require(max_event_len >= min_event_len, "max_event_len", "must be >= min_event_len");
  require(max_events * max_event_len + 1 <= max_segments, "max_segments",
          "too small to lay out max_events events of max_event_len plus a lead-in segment");
  require(noise >= 0.0 && std::isfinite(noise), "noise", "must be finite and >= 0");
  require(overlap_prob >= 0.0 && overlap_prob <= 1.0, "overlap_prob", "must be in [0,1]");
  require(pronoun_prob >= 0.0 && pronoun_prob <= 1.0, "pronoun_prob", "must be in [0,1]");
  require(subject_strength >= 0.0 && std::isfinite(subject_strength), "subject_strength",
          "must be finite and >= 0");
}

std::size_t grammar_template_count() { return grammar::actions().size(); }
std::size_t grammar_subject_count() { return grammar::subjects().size(); }

TemplateLibrary make_templates(const CorpusSpec& spec) {
  TemplateLibrary lib;
  const auto d = static_cast<std::size_t>(spec.feat_dim);
  Rng rng(spec.seed, "corpus.templates");
  for (int t = 0; t < spec.num_templates; ++t) {
    nn::Tensor m({d});
    for (auto& v : m.data()) v = rng.normal();
    lib.means.push_back(std::move(m));
  }
  Rng arng(spec.seed, "corpus.subjects");
  for (std::size_t s = 0; s < grammar::subjects().size(); ++s) {
    nn::Tensor a({d});
    for (auto& v : a.data()) v = spec.subject_strength * arng.normal();
    lib.appearance.push_back(std::move(a));
  }
  return lib;
}

// -------------------------------------------------------------- generator

namespace {

std::string video_id(int index) {
  std::string digits = std::to_string(index);
  return "v" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}

SyntheticVideo generate_video(const CorpusSpec& spec, const TemplateLibrary& lib,
                              const Vocabulary& vocab, int index) {
  Rng rng(spec.seed, "corpus.video", static_cast<std::uint64_t>(index));
  SyntheticVideo video;
  video.id = video_id(index);
  video.subject = rng.uniform_int(0, static_cast<int>(grammar::subjects().size()) - 1);

  const int n = rng.uniform_int(spec.min_events, spec.max_events);
  std::vector<int> pool(spec.num_templates);
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> templates(n);
  for (int i = 0; i < n; ++i) {
    const int j = rng.uniform_int(i, spec.num_templates - 1);
    std::swap(pool[i], pool[j]);
    templates[i] = pool[i];
  }
  std::vector<int> lengths(n);
  for (auto& l : lengths) l = rng.uniform_int(spec.min_event_len, spec.max_event_len);
  std::vector<int> overlap(n, 0);  // overlap[i]: segments shared by events i-1 and i
  for (int i = 1; i < n; ++i) {
    const int cap = std::min(lengths[i - 1], lengths[i]) / 2;
    if (cap >= 1 && rng.bernoulli(spec.overlap_prob)) overlap[i] = rng.uniform_int(1, cap);
  }
  const int required = std::accumulate(lengths.begin(), lengths.end(), 0) -
                       std::accumulate(overlap.begin(), overlap.end(), 0);
  const int t_c = std::max(rng.uniform_int(spec.min_segments, spec.max_segments), required + 1);

  // Slot 0 is the lead-in (at least one background segment), slots 1..n-1 sit
  // between non-overlapping neighbours, slot n is the tail.
  std::vector<int> gaps(n + 1, 0);
  gaps[0] = 1;
  std::vector<int> eligible{0};
  for (int i = 1; i < n; ++i) {
    if (overlap[i] == 0) eligible.push_back(i);
  }
  eligible.push_back(n);
  for (int free = t_c - required - 1; free > 0; --free) {
    gaps[eligible[rng.uniform_int(0, static_cast<int>(eligible.size()) - 1)]] += 1;
  }

  const auto& subject = grammar::subjects()[video.subject];
  int cursor = gaps[0];
  for (int i = 0; i < n; ++i) {
    if (i > 0) cursor += overlap[i] > 0 ? -overlap[i] : gaps[i];
    GroundTruthEvent ev;
    ev.interval = {cursor, cursor + lengths[i] - 1};
    ev.template_id = templates[i];
    const bool pronoun = i > 0 && rng.bernoulli(spec.pronoun_prob);
    ev.caption = vocab.encode(
        grammar::realize(grammar::actions()[templates[i]], subject, i == 0, pronoun));
    video.events.push_back(std::move(ev));
    cursor += lengths[i];
  }

  const auto d = static_cast<std::size_t>(spec.feat_dim);
  video.segments = nn::Tensor({static_cast<std::size_t>(t_c), d});
  const nn::Tensor& appearance = lib.appearance[video.subject];
  for (int s = 0; s < t_c; ++s) {
    int covering = 0;
    std::vector<double> mean(d, 0.0);
    for (const auto& ev : video.events) {
      if (s < ev.interval.start || s > ev.interval.end) continue;
      ++covering;
      for (std::size_t k = 0; k < d; ++k) mean[k] += lib.means[ev.template_id][k];
    }
    for (std::size_t k = 0; k < d; ++k) {
      double v = covering ? mean[k] / covering : 0.0;
      v += appearance[k];
      if (spec.noise > 0.0) v += spec.noise * rng.normal();
      video.segments.at(s, k) = v;
    }
  }
  std::stable_sort(video.events.begin(), video.events.end(), [](const auto& a, const auto& b) {
    return a.interval < b.interval;
  });
  return video;
}

}  // namespace

Corpus generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  Corpus corpus;
  corpus.spec = spec;
  corpus.vocab = Vocabulary::from_words(
      grammar::lexicon(static_cast<std::size_t>(spec.num_templates), spec.max_events >= 2));
  const TemplateLibrary lib = make_templates(spec);
  corpus.videos.reserve(spec.num_videos);
  for (int i = 0; i < spec.num_videos; ++i) {
    corpus.videos.push_back(generate_video(spec, lib, corpus.vocab, i));
  }
  return corpus;
}

// -------------------------------------------------------------- file format

namespace {

constexpr std::string_view kMagic = "densecap-corpus 1";

nlohmann::json spec_to_json(const CorpusSpec& s) {
  return {{"seed", s.seed},
          {"num_videos", s.num_videos},
          {"min_segments", s.min_segments},
          {"max_segments", s.max_segments},
          {"feat_dim", s.feat_dim},
          {"min_events", s.min_events},
          {"max_events", s.max_events},
          {"num_templates", s.num_templates},
          {"min_event_len", s.min_event_len},
          {"max_event_len", s.max_event_len},
          {"noise", s.noise},
          {"overlap_prob", s.overlap_prob},
          {"pronoun_prob", s.pronoun_prob},
          {"subject_strength", s.subject_strength}};
}

CorpusSpec spec_from_json(const nlohmann::json& j) {
  CorpusSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.num_videos = j.at("num_videos").get<int>();
  s.min_segments = j.at("min_segments").get<int>();
  s.max_segments = j.at("max_segments").get<int>();
  s.feat_dim = j.at("feat_dim").get<int>();
  s.min_events = j.at("min_events").get<int>();
  s.max_events = j.at("max_events").get<int>();
  s.num_templates = j.at("num_templates").get<int>();
  s.min_event_len = j.at("min_event_len").get<int>();
  s.max_event_len = j.at("max_event_len").get<int>();
  s.noise = j.at("noise").get<double>();
  s.overlap_prob = j.at("overlap_prob").get<double>();
  s.pronoun_prob = j.at("pronoun_prob").get<double>();
  s.subject_strength = j.at("subject_strength").get<double>();
  return s;
}

int to_int(const std::string& s, const std::string& context) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError(context + ": expected integer, got '" + s + "'");
  }
  return v;
}

class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool done() const { return pos_ >= text_.size(); }
  std::string_view next() {
    if (done()) throw ParseError("corpus: unexpected end of file (truncated?)");
    auto nl = text_.find('\n', pos_);
    if (nl == std::string_view::npos) nl = text_.size();
    auto line = text_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    ++line_no_;
    return line;
  }
  std::size_t line_no() const { return line_no_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
};

}  // namespace

std::string serialize_corpus(const Corpus& corpus) {
  std::string out(kMagic);
  out += '\n';
  out += "spec " + spec_to_json(corpus.spec).dump() + "\n";
  out += "vocab " + std::to_string(corpus.vocab.size()) + "\n";
  for (const auto& t : corpus.vocab.tokens()) out += t + "\n";
  out += "videos " + std::to_string(corpus.videos.size()) + "\n";
  for (const auto& v : corpus.videos) {
    out += "video " + v.id + " " + std::to_string(v.num_segments()) + " " +
           std::to_string(v.feat_dim()) + " " + std::to_string(v.subject) + " " +
           std::to_string(v.events.size()) + "\n";
    for (const auto& ev : v.events) {
      out += "event " + std::to_string(ev.interval.start) + " " + std::to_string(ev.interval.end) +
             " " + std::to_string(ev.template_id);
      for (int id : ev.caption) out += " " + std::to_string(id);
      out += "\n";
    }
    for (int s = 0; s < v.num_segments(); ++s) {
      std::string raw;
      util::append_f64_le(raw, v.segments.row(s));
      out += "row " + util::base64_encode(raw) + "\n";
    }
    out += "end\n";
  }
  return out;
}

Corpus parse_corpus(std::string_view text) {
  LineReader in(text);
  const auto magic = in.next();
  if (magic.rfind("densecap-corpus ", 0) != 0) throw ParseError("corpus: not a densecap corpus file");
  if (magic != kMagic) {
    throw ParseError("corpus: version mismatch ('" + std::string(magic) + "', expected '" +
                     std::string(kMagic) + "')");
  }
  Corpus corpus;
  {
    const auto line = in.next();
    if (line.rfind("spec ", 0) != 0) throw ParseError("corpus: missing spec line");
    try {
      corpus.spec = spec_from_json(nlohmann::json::parse(line.substr(5)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("corpus: bad spec line: ") + e.what());
    }
  }
  {
    const auto f = util::split_ws(in.next());
    if (f.size() != 2 || f[0] != "vocab") throw ParseError("corpus: missing vocab line");
    const int n = to_int(f[1], "vocab size");
    std::vector<std::string> tokens;
    for (int i = 0; i < n; ++i) tokens.emplace_back(in.next());
    corpus.vocab = Vocabulary::from_tokens(std::move(tokens));
  }
  const auto vf = util::split_ws(in.next());
  if (vf.size() != 2 || vf[0] != "videos") throw ParseError("corpus: missing videos line");
  const int num_videos = to_int(vf[1], "video count");
  const auto vocab_size = corpus.vocab.size();
  for (int vi = 0; vi < num_videos; ++vi) {
    const auto h = util::split_ws(in.next());
    if (h.size() != 6 || h[0] != "video") {
      throw ParseError("corpus: expected video header at line " + std::to_string(in.line_no()));
    }
    SyntheticVideo v;
    v.id = h[1];
    const std::string ctx = "corpus video " + v.id;
    const int t_c = to_int(h[2], ctx);
    const int d = to_int(h[3], ctx);
    v.subject = to_int(h[4], ctx);
    const int n_events = to_int(h[5], ctx);
    if (t_c < 1 || t_c > CorpusSpec::kMaxSegments || d < 1) {
      throw ParseError(ctx + ": invalid dimensions " + h[2] + "x" + h[3]);
    }
    for (int e = 0; e < n_events; ++e) {
      const auto f = util::split_ws(in.next());
      if (f.size() < 5 || f[0] != "event") throw ParseError(ctx + ": expected event line");
      GroundTruthEvent ev;
      ev.interval = {to_int(f[1], ctx), to_int(f[2], ctx)};
      ev.template_id = to_int(f[3], ctx);
      for (std::size_t k = 4; k < f.size(); ++k) {
        const int id = to_int(f[k], ctx);
        if (id < 0 || static_cast<std::size_t>(id) >= vocab_size) {
          throw ParseError(ctx + ": unknown token index " + f[k]);
        }
        ev.caption.push_back(id);
      }
      if (!ev.interval.well_formed() || ev.interval.end >= t_c) {
        throw ParseError(ctx + ": event interval outside [0, T_c)");
      }
      try {
        validate_caption(ev.caption, vocab_size);
      } catch (const std::invalid_argument& err) {
        throw ParseError(ctx + ": " + err.what());
      }
      v.events.push_back(std::move(ev));
    }
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(t_c) * d);
    int rows = 0;
    for (;;) {
      const auto line = in.next();
      if (line == "end") break;
      if (line.rfind("row ", 0) != 0) throw ParseError(ctx + ": unexpected line in feature block");
      const std::string raw = util::base64_decode(line.substr(4));
      if (raw.size() != static_cast<std::size_t>(d) * 8) {
        throw ParseError(ctx + ": feature row " + std::to_string(rows) + " has " +
                         std::to_string(raw.size() / 8) + " values, expected " + std::to_string(d));
      }
      const auto values = util::read_f64_le(raw, 0, d);
      data.insert(data.end(), values.begin(), values.end());
      ++rows;
    }
    if (rows != t_c) {
      throw ParseError(ctx + ": declared T_c=" + std::to_string(t_c) + " but found " +
                       std::to_string(rows) + " feature rows");
    }
    v.segments = nn::Tensor({static_cast<std::size_t>(t_c), static_cast<std::size_t>(d)},
                            std::move(data));
    if (v.events.empty()) throw ParseError(ctx + ": video has no events");
    corpus.videos.push_back(std::move(v));
  }
  return corpus;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  util::write_file(path.string(), serialize_corpus(corpus));
}

Corpus read_corpus(const std::filesystem::path& path) {
  return parse_corpus(util::read_file(path.string()));
}

// ------------------------------------------------------------------ splits

Split split_of(std::string_view video_id) {
  return fnv1a64(video_id) % 5 == 0 ? Split::kVal : Split::kTrain;
}

std::vector<const SyntheticVideo*> select_split(const Corpus& corpus, Split split) {
  std::vector<const SyntheticVideo*> out;
  for (const auto& v : corpus.videos) {
    if (split == Split::kAll || split_of(v.id) == split) out.push_back(&v);
  }
  return out;
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "all") return Split::kAll;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train|val|all)");
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats st;
  st.videos = corpus.videos.size();
  st.vocab_size = corpus.vocab.size();
  std::vector<std::size_t> counts(corpus.vocab.size(), 0);
  std::size_t events = 0, segs = 0, tokens = 0, overlapping = 0;
  for (const auto& v : corpus.videos) {
    events += v.events.size();
    segs += static_cast<std::size_t>(v.num_segments());
    bool ov = false;
    for (std::size_t i = 0; i < v.events.size(); ++i) {
      tokens += v.events[i].caption.size() - 1;
      for (int id : v.events[i].caption) ++counts[id];
      for (std::size_t j = i + 1; j < v.events.size(); ++j) {
        if (tiou(v.events[i].interval, v.events[j].interval) > 0.0) ov = true;
      }
    }
    overlapping += ov ? 1 : 0;
  }
  if (st.videos) {
    st.mean_events = static_cast<double>(events) / st.videos;
    st.mean_segments = static_cast<double>(segs) / st.videos;
    st.overlap_fraction = static_cast<double>(overlapping) / st.videos;
  }
  if (events) st.mean_caption_tokens = static_cast<double>(tokens) / events;
  st.min_token_count = SIZE_MAX;
  for (std::size_t i = 3; i < counts.size(); ++i) st.min_token_count = std::min(st.min_token_count, counts[i]);
  if (counts.size() <= 3) st.min_token_count = 0;
  return st;
}

}  // namespace densecap::synth

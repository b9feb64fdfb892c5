#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "densecap/interval.hpp"
#include "densecap/nn/tensor.hpp"

namespace densecap::synth {

inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;

// Token ids of one caption; ends with exactly one kEos and holds no kPad
// before it.
using CaptionTokens = std::vector<int>;

// Throws std::invalid_argument if `ids` breaks the CaptionTokens invariants
// or references an id >= vocab_size.
void validate_caption(const CaptionTokens& ids, std::size_t vocab_size);

class Vocabulary {
 public:
  Vocabulary() = default;
  // `words` must not contain the reserved tokens; they are prepended.
  static Vocabulary from_words(std::vector<std::string> words);
  // Full token list including reserved entries at 0..2.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  int id(std::string_view token) const;  // throws std::out_of_range
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  CaptionTokens encode(const std::vector<std::string>& words) const;  // appends EOS
  // Space-joined words, reserved tokens dropped.
  std::string decode(const CaptionTokens& ids) const;
  std::uint64_t fingerprint() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int, std::less<>> index_;
};

struct GroundTruthEvent {
  Interval interval;
  CaptionTokens caption;
  int template_id = 0;

  bool operator==(const GroundTruthEvent&) const = default;
};

struct SyntheticVideo {
  std::string id;
  nn::Tensor segments;  // [T_c, D_feat]
  std::vector<GroundTruthEvent> events;
  int subject = 0;

  int num_segments() const { return static_cast<int>(segments.rows()); }
  std::size_t feat_dim() const { return segments.cols(); }
  bool operator==(const SyntheticVideo&) const = default;
};

struct CorpusSpec {
  std::uint64_t seed = 7;
  int num_videos = 500;
  int min_segments = 20;
  int max_segments = 40;  // T_max; hard ceiling kMaxSegments
  int feat_dim = 16;
  int min_events = 2;
  int max_events = 4;
  int num_templates = 12;
  int min_event_len = 3;
  int max_event_len = 8;
  double noise = 0.3;
  double overlap_prob = 0.15;
  double pronoun_prob = 0.8;
  double subject_strength = 1.0;

  static constexpr int kMaxSegments = 64;

  // Throws ConfigError naming the offending field.
  void validate() const;
  bool operator==(const CorpusSpec&) const = default;
};

struct Corpus {
  CorpusSpec spec;
  Vocabulary vocab;
  std::vector<SyntheticVideo> videos;

  const SyntheticVideo* find(std::string_view id) const;
  bool operator==(const Corpus&) const = default;
};

// Fixed generator inputs derived from the spec; exposed for tests.
struct TemplateLibrary {
  std::vector<nn::Tensor> means;       // per template, [D_feat]
  std::vector<nn::Tensor> appearance;  // per subject, [D_feat], already scaled
};

std::size_t grammar_template_count();
std::size_t grammar_subject_count();
TemplateLibrary make_templates(const CorpusSpec& spec);

Corpus generate_corpus(const CorpusSpec& spec);

std::string serialize_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view text);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& path);

// 80/20 split keyed on an FNV-1a hash of the video id: hash % 5 == 0 is
// held out.
enum class Split { kTrain, kVal, kAll };
Split split_of(std::string_view video_id);
std::vector<const SyntheticVideo*> select_split(const Corpus& corpus, Split split);
Split parse_split(std::string_view name);

struct CorpusStats {
  std::size_t videos = 0;
  double mean_events = 0.0;
  double mean_segments = 0.0;
  double mean_caption_tokens = 0.0;  // excluding EOS
  double overlap_fraction = 0.0;     // videos with at least one overlapping pair
  std::size_t vocab_size = 0;
  std::size_t min_token_count = 0;   // over non-reserved tokens
};
CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace densecap::synth

#include "synth/grammar.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace densecap::synth::grammar {
namespace {

void append_words(std::vector<std::string>& out, const char* phrase) {
  std::istringstream in(phrase);
  std::string w;
  while (in >> w) out.push_back(w);
}

}  // namespace

const std::vector<Action>& actions() {
  static const std::vector<Action> kActions = {
      {"plays", "play", "the guitar on a street"},
      {"dances", "dance", "on a big stage"},
      {"rides", "ride", "a bike down the road"},
      {"throws", "throw", "a ball to a dog"},
      {"cooks", "cook", "food in the kitchen"},
      {"paints", "paint", "a wall with a brush"},
      {"swims", "swim", "across the pool"},
      {"lifts", "lift", "a heavy weight"},
      {"jumps", "jump", "on a trampoline"},
      {"washes", "wash", "a car outside"},
      {"sings", "sing", "into a microphone"},
      {"climbs", "climb", "a rock wall"},
      {"kicks", "kick", "a ball into a goal"},
      {"skates", "skate", "in a park"},
      {"cuts", "cut", "the grass in a yard"},
      {"plays", "play", "the drums on stage"},
  };
  return kActions;
}

const std::vector<Subject>& subjects() {
  static const std::vector<Subject> kSubjects = {
      {"a man", "he", false},          {"a woman", "she", false},
      {"two men", "they", true},       {"a young girl", "she", false},
      {"a boy", "he", false},          {"a group of people", "they", true},
  };
  return kSubjects;
}

std::vector<std::string> realize(const Action& action, const Subject& subject, bool first_event,
                                 bool use_pronoun) {
  std::vector<std::string> words;
  if (!first_event) words.emplace_back("then");
  if (!first_event && use_pronoun) {
    words.emplace_back(subject.pronoun);
  } else {
    append_words(words, subject.noun_phrase);
  }
  words.emplace_back(subject.plural ? action.verb_plural : action.verb_singular);
  append_words(words, action.rest);
  return words;
}

std::vector<std::string> lexicon(std::size_t num_actions, bool with_connective) {
  std::set<std::string> words;
  if (with_connective) words.insert("then");
  for (const auto& s : subjects()) {
    std::vector<std::string> tmp;
    append_words(tmp, s.noun_phrase);
    words.insert(tmp.begin(), tmp.end());
    words.insert(s.pronoun);
  }
  for (std::size_t i = 0; i < num_actions && i < actions().size(); ++i) {
    const auto& a = actions()[i];
    std::vector<std::string> tmp;
    append_words(tmp, a.rest);
    words.insert(tmp.begin(), tmp.end());
    words.insert(a.verb_singular);
    words.insert(a.verb_plural);
  }
  return {words.begin(), words.end()};
}

}  // namespace densecap::synth::grammar

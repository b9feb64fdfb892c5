#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace densecap::synth::grammar {

struct Action {
  const char* verb_singular;
  const char* verb_plural;
  const char* rest;
};

struct Subject {
  const char* noun_phrase;
  const char* pronoun;
  bool plural;
};

const std::vector<Action>& actions();
const std::vector<Subject>& subjects();

// "a man plays the guitar on a street" / "then he plays ..." / "then a man plays ..."
std::vector<std::string> realize(const Action& action, const Subject& subject, bool first_event,
                                 bool use_pronoun);

// Every word the grammar can emit using the first `num_actions` actions,
// sorted and unique. "then" is only reachable from a second event onward.
std::vector<std::string> lexicon(std::size_t num_actions, bool with_connective);

}  // namespace densecap::synth::grammar

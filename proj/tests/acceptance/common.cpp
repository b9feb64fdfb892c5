#include <chrono>
#include <cstdio>

#include "acceptance/acceptance.hpp"
#include "densecap/nn/ops.hpp"

namespace acceptance {

std::string strf(const char* fmt, ...) {
  char buf[1024];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  return buf;
}

void Verdict::require(bool ok, const std::string& what) {
  notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
  pass = pass && ok;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double seconds_since(double start) { return now_seconds() - start; }

std::vector<densecap::nn::Var> teacher_forced_logprobs(const densecap::scn::ScnModel& model,
                                                       densecap::nn::Tape& tape,
                                                       const std::vector<densecap::scn::EventContext>& events,
                                                       const std::vector<densecap::synth::CaptionTokens>& captions,
                                                       double temperature) {
  namespace nn = densecap::nn;
  const std::size_t v = model.vocab_size();
  const nn::Tensor zeros({model.hidden_dim()});
  nn::LstmState episode{tape.constant(zeros), tape.constant(zeros)};
  nn::Var g = tape.constant(zeros);
  std::vector<nn::Var> out;
  for (std::size_t i = 0; i < events.size(); ++i) {
    episode = model.episode_step(tape.constant(events[i].vis), g, episode);
    const auto ev = model.prepare(tape, events[i]);
    nn::LstmState state{episode.h, tape.constant(zeros)};
    std::size_t prev = densecap::synth::kBos;
    std::vector<nn::Var> terms;
    for (int tok : captions[i]) {
      const auto step = model.word_step(ev, prev, state);
      state = step.state;
      // PAD and BOS are ids 0 and 1, so the emittable ids are the tail [2, V).
      const nn::Var scaled = nn::scale(step.logits, 1.0 / temperature);
      const nn::Var lse = nn::log(nn::sum(nn::exp(nn::slice(scaled, 2, v - 2))));
      terms.push_back(nn::pick(scaled, static_cast<std::size_t>(tok)) - lse);
      prev = static_cast<std::size_t>(tok);
      if (tok == densecap::synth::kEos) break;
    }
    out.push_back(nn::sum(nn::concat(terms)));
    g = state.h;
  }
  return out;
}

}  // namespace acceptance

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "densecap/model_config.hpp"
#include "densecap/nn/adam.hpp"
#include "densecap/synth/corpus.hpp"

namespace densecap {

enum class RewardMetric { kCider, kBleu4 };
enum class RlSampling { kToken, kSequence };

struct TrainConfig {
  nn::AdamConfig adam;
  int epochs_epn = 20;
  int epochs_esgn = 20;
  int epochs_scn = 20;
  int epochs_rl = 30;
  int rollouts = 16;  // R_n
  RewardMetric reward = RewardMetric::kCider;
  RlSampling rl_sampling = RlSampling::kToken;
  double clip_norm = 5.0;  // RL only; <= 0 disables
  int eval_every = 1;      // epochs between held-out evaluations; 0 disables
};

struct PathConfig {
  std::filesystem::path corpus = "run/corpus.dcc";
  std::filesystem::path checkpoints = "run/checkpoints";
  std::filesystem::path output = "run/output";
};

// Everything a command needs. All randomness derives from `seed`; the corpus
// generator receives it as CorpusSpec::seed.
struct RunConfig {
  std::uint64_t seed = 7;
  int workers = 1;
  synth::CorpusSpec corpus;
  ModelConfig model;
  TrainConfig train;
  PathConfig paths;
};

// JSON text of the fully resolved config, defaults included.
std::string config_to_json(const RunConfig& cfg);

// Builds a config from defaults, an optional JSON file, then dotted
// overrides ("train.epochs_epn" -> "3"). Unknown keys and ill-typed values
// throw ConfigError naming the key; the result is validated.
RunConfig resolve_config(const std::filesystem::path& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides);
RunConfig config_from_json(const std::string& text);

// Throws ConfigError naming the first offending field.
void validate_config(const RunConfig& cfg);

std::string reward_metric_name(RewardMetric m);
std::string rl_sampling_name(RlSampling s);

}  // namespace densecap

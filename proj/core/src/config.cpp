#include "densecap/config.hpp"

#include <nlohmann/json.hpp>

#include "densecap/error.hpp"
#include "densecap/util/bytes.hpp"

namespace densecap {

using nlohmann::json;

std::string reward_metric_name(RewardMetric m) { return m == RewardMetric::kCider ? "cider" : "bleu4"; }
std::string rl_sampling_name(RlSampling s) { return s == RlSampling::kToken ? "token" : "sequence"; }

namespace {

json to_json(const RunConfig& c) {
  const auto& s = c.corpus;
  const auto& m = c.model;
  const auto& t = c.train;
  return {
      {"seed", c.seed},
      {"workers", c.workers},
      {"corpus",
       {{"num_videos", s.num_videos},
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
        {"subject_strength", s.subject_strength}}},
      {"model",
       {{"epn",
         {{"hidden", m.epn.hidden},
          {"K", m.epn.K},
          {"top_n", m.epn.top_n},
          {"nms_threshold", m.epn.nms_threshold},
          {"max_candidates", m.epn.max_candidates},
          {"init_range", m.epn.init_range}}},
        {"esgn",
         {{"hidden", m.esgn.hidden},
          {"loc_dim", m.esgn.loc_dim},
          {"attn_dim", m.esgn.attn_dim},
          {"max_events", m.esgn.max_events},
          {"init_range", m.esgn.init_range}}},
        {"scn",
         {{"hidden", m.scn.hidden},
          {"embed_dim", m.scn.embed_dim},
          {"attn_dim", m.scn.attn_dim},
          {"gate_dim", m.scn.gate_dim},
          {"max_len", m.scn.max_len},
          {"temperature", m.scn.temperature},
          {"init_range", m.scn.init_range}}}}},
      {"train",
       {{"lr", t.adam.lr},
        {"beta1", t.adam.beta1},
        {"beta2", t.adam.beta2},
        {"eps", t.adam.eps},
        {"epochs_epn", t.epochs_epn},
        {"epochs_esgn", t.epochs_esgn},
        {"epochs_scn", t.epochs_scn},
        {"epochs_rl", t.epochs_rl},
        {"rollouts", t.rollouts},
        {"reward", reward_metric_name(t.reward)},
        {"rl_sampling", rl_sampling_name(t.rl_sampling)},
        {"clip_norm", t.clip_norm},
        {"eval_every", t.eval_every}}},
      {"paths",
       {{"corpus", c.paths.corpus.string()},
        {"checkpoints", c.paths.checkpoints.string()},
        {"output", c.paths.output.string()}}},
  };
}

RunConfig from_json(const json& j) {
  RunConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.workers = j.at("workers").get<int>();
  const json& s = j.at("corpus");
  c.corpus.seed = c.seed;
  c.corpus.num_videos = s.at("num_videos").get<int>();
  c.corpus.min_segments = s.at("min_segments").get<int>();
  c.corpus.max_segments = s.at("max_segments").get<int>();
  c.corpus.feat_dim = s.at("feat_dim").get<int>();
  c.corpus.min_events = s.at("min_events").get<int>();
  c.corpus.max_events = s.at("max_events").get<int>();
  c.corpus.num_templates = s.at("num_templates").get<int>();
  c.corpus.min_event_len = s.at("min_event_len").get<int>();
  c.corpus.max_event_len = s.at("max_event_len").get<int>();
  c.corpus.noise = s.at("noise").get<double>();
  c.corpus.overlap_prob = s.at("overlap_prob").get<double>();
  c.corpus.pronoun_prob = s.at("pronoun_prob").get<double>();
  c.corpus.subject_strength = s.at("subject_strength").get<double>();
  const json& e = j.at("model").at("epn");
  c.model.epn.hidden = e.at("hidden").get<int>();
  c.model.epn.K = e.at("K").get<int>();
  c.model.epn.top_n = e.at("top_n").get<int>();
  c.model.epn.nms_threshold = e.at("nms_threshold").get<double>();
  c.model.epn.max_candidates = e.at("max_candidates").get<int>();
  c.model.epn.init_range = e.at("init_range").get<double>();
  const json& g = j.at("model").at("esgn");
  c.model.esgn.hidden = g.at("hidden").get<int>();
  c.model.esgn.loc_dim = g.at("loc_dim").get<int>();
  c.model.esgn.attn_dim = g.at("attn_dim").get<int>();
  c.model.esgn.max_events = g.at("max_events").get<int>();
  c.model.esgn.init_range = g.at("init_range").get<double>();
  const json& n = j.at("model").at("scn");
  c.model.scn.hidden = n.at("hidden").get<int>();
  c.model.scn.embed_dim = n.at("embed_dim").get<int>();
  c.model.scn.attn_dim = n.at("attn_dim").get<int>();
  c.model.scn.gate_dim = n.at("gate_dim").get<int>();
  c.model.scn.max_len = n.at("max_len").get<int>();
  c.model.scn.temperature = n.at("temperature").get<double>();
  c.model.scn.init_range = n.at("init_range").get<double>();
  const json& t = j.at("train");
  c.train.adam.lr = t.at("lr").get<double>();
  c.train.adam.beta1 = t.at("beta1").get<double>();
  c.train.adam.beta2 = t.at("beta2").get<double>();
  c.train.adam.eps = t.at("eps").get<double>();
  c.train.epochs_epn = t.at("epochs_epn").get<int>();
  c.train.epochs_esgn = t.at("epochs_esgn").get<int>();
  c.train.epochs_scn = t.at("epochs_scn").get<int>();
  c.train.epochs_rl = t.at("epochs_rl").get<int>();
  c.train.rollouts = t.at("rollouts").get<int>();
  const auto reward = t.at("reward").get<std::string>();
  if (reward == "cider") {
    c.train.reward = RewardMetric::kCider;
  } else if (reward == "bleu4") {
    c.train.reward = RewardMetric::kBleu4;
  } else {
    throw ConfigError("train.reward: expected \"cider\" or \"bleu4\", got \"" + reward + "\"");
  }
  const auto sampling = t.at("rl_sampling").get<std::string>();
  if (sampling == "token") {
    c.train.rl_sampling = RlSampling::kToken;
  } else if (sampling == "sequence") {
    c.train.rl_sampling = RlSampling::kSequence;
  } else {
    throw ConfigError("train.rl_sampling: expected \"token\" or \"sequence\", got \"" + sampling + "\"");
  }
  c.train.clip_norm = t.at("clip_norm").get<double>();
  c.train.eval_every = t.at("eval_every").get<int>();
  const json& p = j.at("paths");
  c.paths.corpus = p.at("corpus").get<std::string>();
  c.paths.checkpoints = p.at("checkpoints").get<std::string>();
  c.paths.output = p.at("output").get<std::string>();
  return c;
}

// Overlays `patch` onto `base`; every key must already exist with a
// compatible type.
void merge_checked(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError((where.empty() ? "config" : where) + ": expected an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!base.contains(key)) throw ConfigError(path + ": unknown key");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_checked(slot, value, path);
    } else if (slot.is_number() && value.is_number()) {
      if ((slot.is_number_integer() || slot.is_number_unsigned()) && value.is_number_float()) {
        throw ConfigError(path + ": expected an integer");
      }
      slot = value;
    } else if (slot.type() == value.type()) {
      slot = value;
    } else {
      throw ConfigError(path + ": expected " + std::string(slot.type_name()) + ", got " + value.type_name());
    }
  }
}

json parse_override(const json& slot, const std::string& key, const std::string& text) {
  if (slot.is_string()) return text;
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    throw ConfigError(key + ": cannot parse value \"" + text + "\"");
  }
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig config_from_json(const std::string& text) {
  json base = to_json(RunConfig{});
  try {
    merge_checked(base, json::parse(text), "");
    RunConfig c = from_json(base);
    validate_config(c);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig resolve_config(const std::filesystem::path& file,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  json base = to_json(RunConfig{});
  try {
    if (!file.empty()) {
      json user;
      try {
        user = json::parse(util::read_file(file.string()));
      } catch (const json::parse_error& e) {
        throw ConfigError(file.string() + ": " + e.what());
      }
      merge_checked(base, user, "");
    }
    for (const auto& [key, text] : overrides) {
      json* slot = &base;
      std::string path;
      std::size_t pos = 0;
      while (true) {
        const std::size_t dot = key.find('.', pos);
        const std::string part = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
        path += (path.empty() ? "" : ".") + part;
        if (!slot->is_object() || !slot->contains(part)) throw ConfigError(path + ": unknown key");
        slot = &(*slot)[part];
        if (dot == std::string::npos) break;
        pos = dot + 1;
      }
      if (slot->is_object()) throw ConfigError(key + ": names a section, not a value");
      json patch = parse_override(*slot, key, text);
      // Reuse merge_checked for type checking by wrapping in a one-key object.
      json holder = json::object({{"v", *slot}});
      merge_checked(holder, json::object({{"v", patch}}), "");
      *slot = holder["v"];
    }
    RunConfig c = from_json(base);
    validate_config(c);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

void validate_config(const RunConfig& c) {
  c.corpus.validate();
  auto positive = [](bool ok, const char* field) {
    if (!ok) throw ConfigError(std::string(field) + ": must be positive");
  };
  positive(c.workers >= 1, "workers");
  positive(c.model.epn.hidden > 0, "model.epn.hidden");
  positive(c.model.epn.K > 0, "model.epn.K");
  positive(c.model.epn.top_n > 0, "model.epn.top_n");
  positive(c.model.epn.max_candidates > 0, "model.epn.max_candidates");
  if (!(c.model.epn.nms_threshold > 0.0 && c.model.epn.nms_threshold <= 1.0)) {
    throw ConfigError("model.epn.nms_threshold: must be in (0, 1]");
  }
  positive(c.model.esgn.hidden > 0, "model.esgn.hidden");
  positive(c.model.esgn.loc_dim > 0, "model.esgn.loc_dim");
  positive(c.model.esgn.attn_dim > 0, "model.esgn.attn_dim");
  positive(c.model.esgn.max_events > 0, "model.esgn.max_events");
  positive(c.model.scn.hidden > 0, "model.scn.hidden");
  positive(c.model.scn.embed_dim > 0, "model.scn.embed_dim");
  positive(c.model.scn.attn_dim > 0, "model.scn.attn_dim");
  positive(c.model.scn.gate_dim > 0, "model.scn.gate_dim");
  positive(c.model.scn.max_len > 0, "model.scn.max_len");
  positive(c.model.scn.temperature > 0.0, "model.scn.temperature");
  positive(c.train.adam.lr > 0.0, "train.lr");
  positive(c.train.rollouts > 0, "train.rollouts");
  for (auto [v, name] : {std::pair{c.train.epochs_epn, "train.epochs_epn"}, {c.train.epochs_esgn, "train.epochs_esgn"},
                         {c.train.epochs_scn, "train.epochs_scn"}, {c.train.epochs_rl, "train.epochs_rl"},
                         {c.train.eval_every, "train.eval_every"}}) {
    if (v < 0) throw ConfigError(std::string(name) + ": must be non-negative");
  }
  if (!(c.train.adam.beta1 >= 0.0 && c.train.adam.beta1 < 1.0)) throw ConfigError("train.beta1: must be in [0, 1)");
  if (!(c.train.adam.beta2 >= 0.0 && c.train.adam.beta2 < 1.0)) throw ConfigError("train.beta2: must be in [0, 1)");
  positive(c.train.adam.eps > 0.0, "train.eps");
}

}  // namespace densecap

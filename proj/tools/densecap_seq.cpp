// densecap-seq: corpus synthesis, staged training, generation, evaluation and
// log reporting.
//
// Exit codes: 0 ok, 1 usage or input error, 2 numeric failure, 3 missing
// prerequisite.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "densecap/config.hpp"
#include "densecap/error.hpp"
#include "densecap/pipeline.hpp"
#include "densecap/synth/corpus.hpp"
#include "densecap/training.hpp"
#include "densecap/util/bytes.hpp"
#include "svg_chart.hpp"

namespace fs = std::filesystem;
using namespace densecap;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON config file");
  cmd->add_option("--seed", c.seed, "master seed");
  cmd->add_option("--workers", c.workers, "worker threads for inference");
  cmd->allow_extras();
}

// Turns leftover "--key value" / "--key=value" arguments into overrides.
std::vector<std::pair<std::string, std::string>> overrides_from(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() == 2) throw ConfigError("unexpected argument \"" + a + "\"");
    const auto eq = a.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(a.substr(2, eq - 2), a.substr(eq + 1));
    } else {
      if (i + 1 >= extras.size()) throw ConfigError(a.substr(2) + ": missing value");
      out.emplace_back(a.substr(2), extras[++i]);
    }
  }
  return out;
}

RunConfig resolve(const Common& c, CLI::App* cmd) {
  auto ov = overrides_from(cmd->remaining());
  if (c.seed) ov.emplace_back("seed", std::to_string(*c.seed));
  if (c.workers) ov.emplace_back("workers", std::to_string(*c.workers));
  return resolve_config(c.config_path, ov);
}

void echo_config(const RunConfig& cfg, const std::string& command) {
  util::write_file((cfg.paths.output / ("config." + command + ".json")).string(), config_to_json(cfg));
}

synth::Corpus load_corpus(const RunConfig& cfg) {
  if (!fs::exists(cfg.paths.corpus)) {
    throw MissingPrerequisite("no corpus at " + cfg.paths.corpus.string() + "; run `densecap-seq synth` first");
  }
  return synth::read_corpus(cfg.paths.corpus);
}

int cmd_synth(const RunConfig& cfg, bool force) {
  if (fs::exists(cfg.paths.corpus) && !force) {
    std::cerr << "error: " << cfg.paths.corpus << " exists; pass --force to overwrite\n";
    return 1;
  }
  synth::CorpusSpec spec = cfg.corpus;
  spec.seed = cfg.seed;
  const auto corpus = synth::generate_corpus(spec);
  synth::write_corpus(cfg.paths.corpus, corpus);
  echo_config(cfg, "synth");
  const auto st = synth::corpus_stats(corpus);
  std::printf("corpus %s: videos=%zu mean_events=%.3f mean_segments=%.2f mean_caption_tokens=%.2f vocab=%zu "
              "train=%zu val=%zu\n",
              cfg.paths.corpus.string().c_str(), st.videos, st.mean_events, st.mean_segments,
              st.mean_caption_tokens, st.vocab_size, synth::select_split(corpus, synth::Split::kTrain).size(),
              synth::select_split(corpus, synth::Split::kVal).size());
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& stage_arg) {
  const auto stage = training::parse_stage(stage_arg);
  const auto corpus = load_corpus(cfg);
  echo_config(cfg, "train-" + stage_arg);
  const auto t0 = std::chrono::steady_clock::now();
  training::TrainHooks hooks;
  hooks.on_epoch = [&](const training::EpochLog& log) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "[%7.1fs] %s\n", secs, training::epoch_log_json(log).c_str());
  };
  const auto result = training::train_stage(stage, corpus, cfg, hooks);
  std::printf("wrote %s (%zu epochs logged to %s)\n", result.checkpoint.string().c_str(), result.log.size(),
              training::log_path(cfg.paths.output, stage).string().c_str());
  return 0;
}

struct Models {
  std::unique_ptr<training::Loaded> epn, esgn, scn;
  std::unique_ptr<epn::EpnModel> epn_model;
  std::unique_ptr<esgn::EsgnModel> esgn_model;
  std::unique_ptr<scn::ScnModel> scn_model;
};

Models load_models(const RunConfig& cfg, const synth::Vocabulary& vocab, const std::string& captioner) {
  Models m;
  const auto dir = cfg.paths.checkpoints;
  m.epn = training::load_stage(dir, training::Stage::kEpn, vocab);
  m.esgn = training::load_stage(dir, training::Stage::kEsgn, vocab);
  training::Stage cap = training::Stage::kScn;
  if (captioner == "rl" || (captioner == "auto" && fs::exists(training::checkpoint_path(dir, training::Stage::kRl)))) {
    cap = training::Stage::kRl;
  } else if (captioner != "scn" && captioner != "auto") {
    throw ConfigError("--captioner: expected auto, scn or rl");
  }
  m.scn = training::load_stage(dir, cap, vocab);
  m.epn_model = std::make_unique<epn::EpnModel>(m.epn->ckpt.params, m.epn->config.model.epn);
  m.esgn_model = std::make_unique<esgn::EsgnModel>(m.esgn->ckpt.params, m.esgn->config.model.esgn);
  m.scn_model = std::make_unique<scn::ScnModel>(m.scn->ckpt.params, m.scn->config.model.scn);
  std::fprintf(stderr, "captioner: %s checkpoint\n", training::stage_name(cap).c_str());
  return m;
}

fs::path default_dump_dir(const RunConfig& cfg, const std::string& mode) { return cfg.paths.output / "generate" / mode; }

int cmd_generate(const RunConfig& cfg, const std::string& mode_arg, const std::string& split_arg,
                 const std::string& captioner, std::string out_dir) {
  const auto mode = pipeline::parse_mode(mode_arg);
  const auto corpus = load_corpus(cfg);
  const auto models = load_models(cfg, corpus.vocab, captioner);
  const auto videos = synth::select_split(corpus, synth::parse_split(split_arg));
  const auto feats = pipeline::analyze_all(*models.epn_model, videos, cfg.workers);
  const auto preds = pipeline::predict_all(feats, *models.esgn_model, *models.scn_model, mode, cfg.workers);
  const fs::path dir = out_dir.empty() ? default_dump_dir(cfg, mode_arg) : fs::path(out_dir);
  pipeline::write_dumps(dir, preds, corpus.vocab);
  echo_config(cfg, "generate");
  std::size_t events = 0, empty = 0;
  for (const auto& p : preds) {
    events += p.events.size();
    if (p.events.empty()) ++empty;
  }
  std::printf("wrote %s: %zu videos, %zu events (%zu videos with no events)\n", dir.string().c_str(), preds.size(),
              events, empty);
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& dumps, const std::string& split_arg, bool per_video) {
  const auto corpus = load_corpus(cfg);
  const fs::path dir = dumps.empty() ? default_dump_dir(cfg, "sdvc") : fs::path(dumps);
  const auto preds = pipeline::read_dumps(dir);
  const auto report = pipeline::evaluate(preds, synth::select_split(corpus, synth::parse_split(split_arg)), per_video);
  util::write_file((dir / "report.json").string(), pipeline::report_to_json(report));
  const auto& d = report.detection;
  const auto& c = report.captions;
  std::printf("videos=%zu mean_events=%.3f (gt %.3f)\n", report.videos, report.mean_predicted, report.mean_gt);
  std::printf("detection: avg_recall=%.4f avg_precision=%.4f\n", d.avg_recall, d.avg_precision);
  for (std::size_t i = 0; i < d.thresholds.size(); ++i) {
    std::printf("  tIoU %.1f: recall=%.4f precision=%.4f bleu4=%.4f cider=%.4f\n", d.thresholds[i], d.recall[i],
                d.precision[i], c.bleu[3][i], c.cider[i]);
  }
  std::printf("captions: bleu1=%.4f bleu2=%.4f bleu3=%.4f bleu4=%.4f cider=%.4f\n", c.avg_bleu[0], c.avg_bleu[1],
              c.avg_bleu[2], c.avg_bleu[3], c.avg_cider);
  std::printf("report: %s\n", (dir / "report.json").string().c_str());
  return 0;
}

int cmd_report(const RunConfig& cfg, bool plot) {
  using nlohmann::json;
  int found = 0;
  for (auto stage : {training::Stage::kEpn, training::Stage::kEsgn, training::Stage::kScn, training::Stage::kRl}) {
    const auto path = training::log_path(cfg.paths.output, stage);
    if (!fs::exists(path)) continue;
    ++found;
    std::vector<json> rows;
    std::istringstream in(util::read_file(path.string()));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) rows.push_back(json::parse(line));
    }
    const auto name = training::stage_name(stage);
    std::printf("%s: %zu epochs\n", name.c_str(), rows.size());
    if (!rows.empty()) std::printf("  last: %s\n", rows.back().dump().c_str());
    if (!plot) continue;
    std::vector<tools::Series> series;
    tools::Series loss{"loss", {}};
    for (const auto& r : rows) {
      if (r.at("updates").get<std::size_t>() > 0) loss.points.emplace_back(r.at("epoch").get<double>(), r.at("loss").get<double>());
    }
    series.push_back(loss);
    std::map<std::string, tools::Series> evals;
    for (const auto& r : rows) {
      if (r.contains("reward_mean")) {
        auto& s = evals["reward_mean"];
        s.name = "reward_mean";
        s.points.emplace_back(r.at("epoch").get<double>(), r.at("reward_mean").get<double>());
      }
      for (const auto& [k, v] : r.at("eval").items()) {
        auto& s = evals[k];
        s.name = k;
        s.points.emplace_back(r.at("epoch").get<double>(), v.get<double>());
      }
    }
    for (auto& [k, s] : evals) series.push_back(s);
    const auto svg = cfg.paths.output / "plots" / (name + ".svg");
    util::write_file(svg.string(), tools::render_chart("stage " + name, series));
    std::printf("  plot: %s\n", svg.string().c_str());
  }
  if (found == 0) {
    throw MissingPrerequisite("no training logs under " + (cfg.paths.output / "logs").string());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dense video captioning with event-sequence selection on synthetic episodes"};
  app.require_subcommand(1);
  Common common;

  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic corpus");
  bool force = false;
  synth_cmd->add_flag("--force", force, "overwrite an existing corpus");
  add_common(synth_cmd, common);

  auto* train_cmd = app.add_subcommand("train", "train one stage: epn, esgn, scn or rl");
  std::string stage;
  train_cmd->add_option("stage", stage, "stage")->required();
  add_common(train_cmd, common);

  auto* gen_cmd = app.add_subcommand("generate", "run EPN -> ESGN -> SCN and write dumps");
  std::string mode = "sdvc", split = "val", captioner = "auto", out_dir;
  gen_cmd->add_option("--mode", mode, "sdvc | esgn-ind | epn-ind");
  gen_cmd->add_option("--split", split, "train | val | all");
  gen_cmd->add_option("--captioner", captioner, "auto | scn | rl");
  gen_cmd->add_option("--out", out_dir, "dump directory");
  add_common(gen_cmd, common);

  auto* eval_cmd = app.add_subcommand("eval", "score dumps against the corpus");
  std::string dumps;
  bool per_video = false;
  eval_cmd->add_option("--dumps", dumps, "dump directory");
  eval_cmd->add_option("--split", split, "train | val | all");
  eval_cmd->add_flag("--per-video", per_video, "include per-video breakdown");
  add_common(eval_cmd, common);

  auto* report_cmd = app.add_subcommand("report", "summarize training logs");
  bool plot = false;
  report_cmd->add_flag("--plot", plot, "write SVG charts of the logs");
  add_common(report_cmd, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const RunConfig cfg = resolve(common, cmd);
    if (cmd == synth_cmd) return cmd_synth(cfg, force);
    if (cmd == train_cmd) return cmd_train(cfg, stage);
    if (cmd == gen_cmd) return cmd_generate(cfg, mode, split, captioner, out_dir);
    if (cmd == eval_cmd) return cmd_eval(cfg, dumps, split, per_video);
    return cmd_report(cfg, plot);
  } catch (const MissingPrerequisite& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

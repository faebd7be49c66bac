#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "obfuslab/corpus.hpp"
#include "obfuslab/errors.hpp"
#include "obfuslab/ids.hpp"
#include "obfuslab/io.hpp"
#include "obfuslab/metrics.hpp"
#include "obfuslab/ppo.hpp"
#include "obfuslab/record.hpp"
#include "obfuslab/swarm.hpp"

namespace obfuslab::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

struct CorpusSynthArgs {
  std::size_t opcodes = corpus::kDefaultVocabularySize;
  std::string vocabulary_path;
  std::size_t malicious = 200;
  std::size_t benign = 200;
  double separation = 0.9;
  std::uint64_t seed = 0;
  std::string out;
};

struct IdsTrainArgs {
  std::string corpus;
  std::string kind = "logistic";
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<std::size_t> hidden;
  std::optional<double> split;
  std::uint64_t seed = 0;
  std::string out;
};

struct AgentTrainArgs {
  std::string corpus;
  std::string ids;
  std::string config;
  std::size_t steps = 200000;
  std::size_t eval_episodes = 0;
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_turns;
  std::optional<double> learning_rate;
  std::string out;
  std::string metrics;
};

struct SwarmArgs {
  std::string manifest;
  std::optional<std::string> corpus;
  std::optional<std::string> ids;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> agents;
  std::optional<std::size_t> budget;
  std::optional<std::size_t> episodes;
  std::optional<std::size_t> workers;
  bool greedy = false;
};

struct ReportArgs {
  std::string archive;
  std::string metrics;
  std::string out;
  std::string histogram;
};

std::string dump_line(const ordered_json& j) { return j.dump() + "\n"; }

corpus::Corpus load_corpus(const std::string& path) { return corpus::read_corpus(path); }

void check_dimensions(const corpus::Corpus& c, const std::string& corpus_path,
                      const ids::IdsModel& model, const std::string& ids_path) {
  if (model.dimension() != c.dimension())
    throw InputError("dimension mismatch: ids checkpoint " + ids_path + " expects " +
                     std::to_string(model.dimension()) + " opcodes but corpus " +
                     corpus_path + " has " + std::to_string(c.dimension()));
}

json read_json_file(const std::string& path) {
  const std::string text = io::read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(path, 0, e.what());
  }
}

void require_object_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
}

void check_file_name(const std::string& agent_id) {
  const bool ok = !agent_id.empty() && agent_id != "." && agent_id != ".." &&
                  std::all_of(agent_id.begin(), agent_id.end(), [](char c) {
                    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                           c == '_' || c == '.';
                  });
  if (!ok) throw ConfigError("agent id '" + agent_id + "' is not usable as a file name");
}

// Paths inside a manifest are relative to the manifest's directory.
std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path.string() : (base / path).lexically_normal().string();
}

int corpus_synth(const CorpusSynthArgs& a, std::ostream& out) {
  corpus::OpcodeVocabulary vocab;
  if (!a.vocabulary_path.empty()) {
    std::vector<std::string> names;
    for (auto& line : io::split_lines(io::read_file(a.vocabulary_path)))
      if (!line.empty()) names.push_back(line);
    vocab = corpus::build_vocabulary(names);
  } else {
    vocab = corpus::synthetic_vocabulary(a.opcodes);
  }
  const auto c = corpus::synthesize_corpus(vocab, a.malicious, a.benign, a.separation, a.seed);
  corpus::write_corpus(c, a.out);
  ordered_json j;
  j["entries"] = c.size();
  j["malicious"] = c.count(corpus::Label::malicious);
  j["benign"] = c.count(corpus::Label::benign);
  j["opcodes"] = c.dimension();
  out << dump_line(j);
  return kExitOk;
}

int corpus_validate(const std::string& path, std::ostream& out) {
  const auto c = load_corpus(path);
  ordered_json j;
  j["entries"] = c.size();
  j["malicious"] = c.count(corpus::Label::malicious);
  j["benign"] = c.count(corpus::Label::benign);
  j["opcodes"] = c.dimension();
  out << dump_line(j);
  return kExitOk;
}

ordered_json metrics_json(const ids::IdsMetrics& m) {
  ordered_json j;
  j["accuracy"] = m.accuracy;
  j["false_positive_rate"] = m.false_positive_rate;
  j["n_eval"] = m.n_eval;
  return j;
}

int ids_train(const IdsTrainArgs& a, std::ostream& out) {
  const auto c = load_corpus(a.corpus);
  ids::TrainOptions opts;
  try {
    opts.kind = ids::parse_model_kind(a.kind);
  } catch (const Error&) {
    throw ConfigError("unknown model kind '" + a.kind + "'");
  }
  if (a.epochs) opts.epochs = *a.epochs;
  if (a.learning_rate) opts.learning_rate = *a.learning_rate;
  if (a.hidden) opts.hidden_units = *a.hidden;
  if (a.split) opts.split_fraction = *a.split;
  opts.seed = a.seed;
  const auto result = ids::train_ids(c, opts);
  ids::save_ids(result.model, a.out);
  out << dump_line(metrics_json(result.metrics));
  return kExitOk;
}

int ids_eval(const std::string& corpus_path, const std::string& ids_path, std::ostream& out) {
  const auto c = load_corpus(corpus_path);
  const auto model = ids::load_ids(ids_path);
  check_dimensions(c, corpus_path, model, ids_path);
  out << dump_line(metrics_json(ids::evaluate_ids(model, c)));
  return kExitOk;
}

std::string format_updates(const std::vector<ppo::UpdateRecord>& records) {
  std::string text;
  for (const auto& r : records) text += dump_line(ppo::to_json(r));
  return text;
}

int agent_train(const AgentTrainArgs& a, std::ostream& out) {
  auto c = std::make_shared<const corpus::Corpus>(load_corpus(a.corpus));
  auto model = std::make_shared<const ids::IdsModel>(ids::load_ids(a.ids));
  check_dimensions(*c, a.corpus, *model, a.ids);

  swarm::CampaignOptions opts;
  opts.env.vocab_cardinality = c->dimension();
  opts.env.predictor = model;
  swarm::AgentSpec spec{"agent", a.seed};
  if (!a.config.empty()) {
    const json cfg = read_json_file(a.config);
    require_object_keys(cfg, {"env", "ppo"}, a.config);
    if (cfg.contains("env")) spec.env_overrides = cfg["env"];
    if (cfg.contains("ppo")) spec.ppo_overrides = cfg["ppo"];
  }
  if (a.max_turns) spec.env_overrides["max_turns"] = *a.max_turns;
  if (a.learning_rate) spec.ppo_overrides["learning_rate"] = *a.learning_rate;
  opts.train_budget = a.steps;
  opts.eval_episodes = a.eval_episodes;

  const auto result = swarm::run_campaign(std::span(&spec, 1), c, model, opts);
  const auto& agent = result.agents.front();
  if (agent.error) throw TrainingError(*agent.error);

  ppo::PpoConfig ppo_config;
  ppo::apply_overrides(ppo_config, spec.ppo_overrides);
  ppo_config.seed = a.seed;
  ppo::save_agent(*agent.policy, ppo_config, a.out);
  if (!a.metrics.empty()) io::write_file_atomic(a.metrics, format_updates(agent.training));

  ordered_json j;
  j["updates"] = agent.training.size();
  j["train_steps"] = agent.train_steps;
  if (!agent.training.empty()) j["final_mean_reward"] = agent.training.back().mean_reward;
  if (!agent.evaluations.empty())
    j["evaluation"] = json::parse(
        metrics::evasion_summary_json(metrics::evasion_statistics(agent.evaluations)));
  out << dump_line(j);
  return kExitOk;
}

int swarm_run(const SwarmArgs& a, std::ostream& out) {
  const json manifest = read_json_file(a.manifest);
  require_object_keys(manifest,
                      {"corpus", "ids", "output", "seed", "agents", "agent_prefix",
                       "train_budget", "eval_episodes", "greedy_evaluation", "workers", "env",
                       "ppo"},
                      a.manifest);
  const fs::path base = fs::path(a.manifest).parent_path();
  auto get_path = [&](const std::optional<std::string>& flag, const char* key) {
    if (flag) return *flag;
    if (!manifest.contains(key))
      throw ConfigError(a.manifest + ": missing '" + std::string(key) + "'");
    return resolve(base, manifest[key].get<std::string>());
  };

  const std::string corpus_path = get_path(a.corpus, "corpus");
  const std::string ids_path = get_path(a.ids, "ids");
  const fs::path out_dir = get_path(a.out, "output");

  auto c = std::make_shared<const corpus::Corpus>(load_corpus(corpus_path));
  auto model = std::make_shared<const ids::IdsModel>(ids::load_ids(ids_path));
  check_dimensions(*c, corpus_path, *model, ids_path);

  swarm::CampaignOptions opts;
  opts.env.vocab_cardinality = c->dimension();
  opts.env.predictor = model;
  try {
    if (manifest.contains("env")) env::apply_overrides(opts.env, manifest["env"]);
    if (manifest.contains("ppo")) ppo::apply_overrides(opts.ppo, manifest["ppo"]);
    opts.train_budget = a.budget.value_or(manifest.value("train_budget", std::size_t{100000}));
    opts.eval_episodes = a.episodes.value_or(manifest.value("eval_episodes", std::size_t{100}));
    opts.greedy_evaluation = a.greedy || manifest.value("greedy_evaluation", false);
    opts.workers = a.workers.value_or(manifest.value("workers", std::size_t{1}));
  } catch (const json::exception& e) {
    throw ConfigError(a.manifest + ": " + e.what());
  }

  std::vector<swarm::AgentSpec> specs;
  const json agents = manifest.value("agents", json(1));
  if (agents.is_array() && !a.agents) {
    if (a.seed) throw ConfigError("--seed needs a counted agent list; " + a.manifest +
                                  " lists agents explicitly");
    for (const auto& item : agents) specs.push_back(swarm::agent_spec_from_json(item));
  } else {
    std::size_t n = 0;
    std::uint64_t seed = 0;
    try {
      n = a.agents.value_or(agents.is_number_unsigned() ? agents.get<std::size_t>() : 0);
      seed = a.seed.value_or(manifest.value("seed", std::uint64_t{0}));
    } catch (const json::exception& e) {
      throw ConfigError(a.manifest + ": " + e.what());
    }
    swarm::AgentSpec proto{manifest.value("agent_prefix", std::string("agent")), seed};
    specs = swarm::spawn_agents(proto, n, swarm::SeedStrategy::sequential);
  }
  for (const auto& s : specs) check_file_name(s.agent_id);

  const auto result = swarm::run_campaign(specs, c, model, opts);

  fs::create_directories(out_dir / "metrics");
  fs::create_directories(out_dir / "agents");
  const auto evaluations = result.all_evaluations();
  io::write_file_atomic(out_dir / "archive.jsonl", format_records(result.archive));
  io::write_file_atomic(out_dir / "evaluations.jsonl", format_records(evaluations));

  ordered_json summary;
  ordered_json config;
  config["env"] = env::to_json(opts.env);
  config["ppo"] = ppo::to_json(opts.ppo);
  config["ppo"].erase("seed");
  config["train_budget"] = opts.train_budget;
  config["eval_episodes"] = opts.eval_episodes;
  config["greedy_evaluation"] = opts.greedy_evaluation;
  summary["config"] = config;
  summary["evaluation"] =
      evaluations.empty()
          ? ordered_json()
          : ordered_json::parse(
                metrics::evasion_summary_json(metrics::evasion_statistics(evaluations)));
  summary["archive_size"] = result.archive.size();
  const auto sim = metrics::similarity_summary(result.archive);
  summary["archive_similarity_median"] = sim.median ? ordered_json(*sim.median) : ordered_json();
  summary["archive_similarity_undefined"] = sim.undefined;

  ordered_json per_agent = ordered_json::array();
  std::size_t failed = 0;
  for (const auto& agent : result.agents) {
    ordered_json j;
    j["agent_id"] = agent.agent_id;
    j["seed"] = agent.seed;
    j["train_steps"] = agent.train_steps;
    j["eval_steps"] = agent.eval_steps;
    j["archived"] = agent.archived.size();
    j["error"] = agent.error ? ordered_json(*agent.error) : ordered_json();
    if (!agent.evaluations.empty())
      j["evaluation"] = ordered_json::parse(
          metrics::evasion_summary_json(metrics::evasion_statistics(agent.evaluations)));
    j["action_histogram"] = agent.action_histogram;
    per_agent.push_back(j);
    if (agent.error) {
      ++failed;
      continue;
    }
    io::write_file_atomic(out_dir / "metrics" / (agent.agent_id + ".jsonl"),
                          format_updates(agent.training));
    ppo::PpoConfig cfg = opts.ppo;
    for (const auto& s : specs)
      if (s.agent_id == agent.agent_id) ppo::apply_overrides(cfg, s.ppo_overrides);
    cfg.seed = agent.seed;
    io::write_file_atomic(out_dir / "agents" / (agent.agent_id + ".ckpt"),
                          ppo::encode_agent(*agent.policy, cfg));
  }
  summary["agents"] = per_agent;
  try {
    summary["dissimilarity"] = swarm::to_json(swarm::agent_dissimilarity(result));
  } catch (const InputError&) {
    summary["dissimilarity"] = nullptr;
  }
  io::write_file_atomic(out_dir / "summary.json", summary.dump(2) + "\n");

  ordered_json line;
  line["agents"] = result.agents.size();
  line["failed"] = failed;
  line["archive_size"] = result.archive.size();
  line["evaluation"] = summary["evaluation"];
  out << dump_line(line);
  return failed == 0 ? kExitOk : kExitFailure;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    io::write_file_atomic(path, text);
}

int report_evasion(const ReportArgs& a, std::ostream& out) {
  const auto records = read_records(a.archive);
  if (records.empty()) throw InputError(a.archive + ": no records");
  const auto stats = metrics::evasion_statistics(records);
  emit(a.out, metrics::evasion_summary_json(stats) + "\n", out);
  if (!a.histogram.empty()) io::write_file_atomic(a.histogram, metrics::histogram_csv(stats));
  return kExitOk;
}

int report_curves(const ReportArgs& a, std::ostream& out) {
  const auto rows = metrics::training_curves(io::read_file(a.metrics), a.metrics);
  emit(a.out, metrics::curves_csv(rows), out);
  return kExitOk;
}

int report_similarity(const ReportArgs& a, std::ostream& out) {
  const auto records = read_records(a.archive);
  emit(a.out, metrics::similarity_csv(records), out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Opcode-frequency obfuscation lab"};
  app.name("obfuslab");
  app.require_subcommand(1);

  CorpusSynthArgs synth;
  std::string validate_path;
  auto* corpus_cmd = app.add_subcommand("corpus", "Synthesize or validate a corpus");
  corpus_cmd->require_subcommand(1);
  auto* synth_cmd = corpus_cmd->add_subcommand("synth", "Write a synthetic two-class corpus");
  synth_cmd->add_option("--opcodes", synth.opcodes, "Vocabulary size")->check(CLI::Range(2, 100000));
  synth_cmd->add_option("--vocabulary", synth.vocabulary_path,
                        "File with one mnemonic per line (overrides --opcodes)");
  synth_cmd->add_option("--malicious", synth.malicious, "Malicious entries");
  synth_cmd->add_option("--benign", synth.benign, "Benign entries");
  synth_cmd->add_option("--separation", synth.separation, "Class separation in [0,1]")
      ->check(CLI::Range(0.0, 1.0));
  synth_cmd->add_option("--seed", synth.seed, "Random seed");
  synth_cmd->add_option("--out", synth.out, "Output corpus file")->required();
  auto* validate_cmd = corpus_cmd->add_subcommand("validate", "Parse and summarise a corpus");
  validate_cmd->add_option("--corpus", validate_path, "Corpus file")->required();

  IdsTrainArgs ids_args;
  std::string eval_corpus, eval_ids;
  auto* ids_cmd = app.add_subcommand("ids", "Train or evaluate the surrogate IDS");
  ids_cmd->require_subcommand(1);
  auto* ids_train_cmd = ids_cmd->add_subcommand("train", "Train on a stratified split");
  ids_train_cmd->add_option("--corpus", ids_args.corpus, "Corpus file")->required();
  ids_train_cmd->add_option("--kind", ids_args.kind, "logistic or mlp");
  ids_train_cmd->add_option("--epochs", ids_args.epochs, "Gradient-descent epochs");
  ids_train_cmd->add_option("--learning-rate", ids_args.learning_rate, "Step size");
  ids_train_cmd->add_option("--hidden", ids_args.hidden, "Hidden units (mlp)");
  ids_train_cmd->add_option("--split", ids_args.split, "Training share");
  ids_train_cmd->add_option("--seed", ids_args.seed, "Random seed");
  ids_train_cmd->add_option("--out", ids_args.out, "Output checkpoint")->required();
  auto* ids_eval_cmd = ids_cmd->add_subcommand("eval", "Score a checkpoint on a corpus");
  ids_eval_cmd->add_option("--corpus", eval_corpus, "Corpus file")->required();
  ids_eval_cmd->add_option("--ids", eval_ids, "IDS checkpoint")->required();

  AgentTrainArgs agent_args;
  auto* agent_cmd = app.add_subcommand("agent", "Train a single PPO agent");
  agent_cmd->require_subcommand(1);
  auto* agent_train_cmd = agent_cmd->add_subcommand("train", "Train and checkpoint one agent");
  agent_train_cmd->add_option("--corpus", agent_args.corpus, "Corpus file")->required();
  agent_train_cmd->add_option("--ids", agent_args.ids, "IDS checkpoint")->required();
  agent_train_cmd->add_option("--config", agent_args.config,
                              "JSON file with \"env\" and \"ppo\" overrides");
  agent_train_cmd->add_option("--steps", agent_args.steps, "Environment-step budget");
  agent_train_cmd->add_option("--eval-episodes", agent_args.eval_episodes,
                              "Frozen-policy episodes after training");
  agent_train_cmd->add_option("--max-turns", agent_args.max_turns, "Episode length cap");
  agent_train_cmd->add_option("--learning-rate", agent_args.learning_rate, "Adam step size");
  agent_train_cmd->add_option("--seed", agent_args.seed, "Random seed");
  agent_train_cmd->add_option("--out", agent_args.out, "Output checkpoint")->required();
  agent_train_cmd->add_option("--metrics", agent_args.metrics, "Per-update metrics stream");

  SwarmArgs swarm_args;
  auto* swarm_cmd = app.add_subcommand("swarm", "Run a multi-agent campaign");
  swarm_cmd->require_subcommand(1);
  auto* swarm_run_cmd = swarm_cmd->add_subcommand("run", "Train and evaluate every agent");
  swarm_run_cmd->add_option("--manifest", swarm_args.manifest, "Campaign manifest")->required();
  swarm_run_cmd->add_option("--corpus", swarm_args.corpus, "Corpus file");
  swarm_run_cmd->add_option("--ids", swarm_args.ids, "IDS checkpoint");
  swarm_run_cmd->add_option("--out", swarm_args.out, "Output directory");
  swarm_run_cmd->add_option("--seed", swarm_args.seed, "Base agent seed");
  swarm_run_cmd->add_option("--agents", swarm_args.agents, "Number of agents");
  swarm_run_cmd->add_option("--budget", swarm_args.budget, "Training steps per agent");
  swarm_run_cmd->add_option("--episodes", swarm_args.episodes, "Evaluation episodes per agent");
  swarm_run_cmd->add_option("--workers", swarm_args.workers, "Parallel agents")
      ->check(CLI::PositiveNumber);
  swarm_run_cmd->add_flag("--greedy", swarm_args.greedy, "Greedy evaluation policy");

  ReportArgs report_args;
  auto* report_cmd = app.add_subcommand("report", "Summaries and CSV exports");
  report_cmd->require_subcommand(1);
  auto* evasion_cmd = report_cmd->add_subcommand("evasion", "Evasion statistics of records");
  evasion_cmd->add_option("--archive", report_args.archive, "Record file")->required();
  evasion_cmd->add_option("--out", report_args.out, "Summary file (default stdout)");
  evasion_cmd->add_option("--histogram", report_args.histogram, "Histogram CSV");
  auto* curves_cmd = report_cmd->add_subcommand("curves", "Training curves as CSV");
  curves_cmd->add_option("--metrics", report_args.metrics, "Metrics stream")->required();
  curves_cmd->add_option("--out", report_args.out, "CSV file (default stdout)");
  auto* sim_cmd = report_cmd->add_subcommand("similarity", "Per-record similarity as CSV");
  sim_cmd->add_option("--archive", report_args.archive, "Record file")->required();
  sim_cmd->add_option("--out", report_args.out, "CSV file (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth_cmd->parsed()) return corpus_synth(synth, out);
    if (validate_cmd->parsed()) return corpus_validate(validate_path, out);
    if (ids_train_cmd->parsed()) return ids_train(ids_args, out);
    if (ids_eval_cmd->parsed()) return ids_eval(eval_corpus, eval_ids, out);
    if (agent_train_cmd->parsed()) return agent_train(agent_args, out);
    if (swarm_run_cmd->parsed()) return swarm_run(swarm_args, out);
    if (evasion_cmd->parsed()) return report_evasion(report_args, out);
    if (curves_cmd->parsed()) return report_curves(report_args, out);
    if (sim_cmd->parsed()) return report_similarity(report_args, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace obfuslab::cli

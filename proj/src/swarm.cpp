#include "obfuslab/swarm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include "obfuslab/errors.hpp"
#include "obfuslab/metrics.hpp"
#include "obfuslab/random.hpp"

namespace obfuslab::swarm {

AgentSpec agent_spec_from_json(const nlohmann::json& value) {
  if (!value.is_object()) throw ConfigError("agent spec must be an object");
  AgentSpec spec;
  try {
    for (const auto& [key, item] : value.items()) {
      if (key == "agent_id") spec.agent_id = item.get<std::string>();
      else if (key == "seed") spec.seed = item.get<std::uint64_t>();
      else if (key == "ppo") spec.ppo_overrides = item;
      else if (key == "env") spec.env_overrides = item;
      else throw ConfigError("agent spec: unknown field \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("agent spec: ") + e.what());
  }
  if (spec.agent_id.empty()) throw ConfigError("agent spec needs a non-empty agent_id");
  return spec;
}

nlohmann::ordered_json to_json(const AgentSpec& spec) {
  nlohmann::ordered_json j;
  j["agent_id"] = spec.agent_id;
  j["seed"] = spec.seed;
  j["ppo"] = spec.ppo_overrides;
  j["env"] = spec.env_overrides;
  return j;
}

std::vector<AgentSpec> spawn_agents(const AgentSpec& base, std::size_t n,
                                    SeedStrategy strategy,
                                    std::span<const std::uint64_t> explicit_seeds) {
  if (n == 0) throw ConfigError("spawn_agents: need at least one agent");
  if (strategy == SeedStrategy::explicit_list && explicit_seeds.size() != n)
    throw ConfigError("spawn_agents: explicit seed list has " +
                      std::to_string(explicit_seeds.size()) + " seeds for " +
                      std::to_string(n) + " agents");
  std::vector<AgentSpec> specs;
  std::set<std::uint64_t> seen;
  for (std::size_t k = 0; k < n; ++k) {
    AgentSpec spec = base;
    spec.agent_id = base.agent_id + "-" + std::to_string(k);
    spec.seed = strategy == SeedStrategy::sequential ? base.seed + k : explicit_seeds[k];
    if (!seen.insert(spec.seed).second)
      throw ConfigError("spawn_agents: seed " + std::to_string(spec.seed) + " repeats");
    specs.push_back(std::move(spec));
  }
  return specs;
}

std::vector<ObfuscationRecord> CampaignResult::all_evaluations() const {
  std::vector<ObfuscationRecord> out;
  for (const auto& a : agents) out.insert(out.end(), a.evaluations.begin(), a.evaluations.end());
  return out;
}

namespace {

struct ResolvedAgent {
  AgentSpec spec;
  env::EnvConfig env;
  ppo::PpoConfig ppo;
};

ResolvedAgent resolve(const AgentSpec& spec, const corpus::Corpus& corpus,
                      std::shared_ptr<const ids::IdsModel> ids_model,
                      const CampaignOptions& options) {
  ResolvedAgent r{spec, options.env, options.ppo};
  env::apply_overrides(r.env, spec.env_overrides);
  ppo::apply_overrides(r.ppo, spec.ppo_overrides);
  r.env.vocab_cardinality = corpus.dimension();
  r.env.seed = derive_seed(spec.seed, seed_stream::kEnvironment);
  r.env.predictor = std::move(ids_model);
  r.ppo.seed = spec.seed;
  r.env.validate();
  r.ppo.validate();
  return r;
}

AgentOutcome run_agent(const ResolvedAgent& agent,
                       const std::shared_ptr<const corpus::Corpus>& corpus,
                       const CampaignOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  AgentOutcome out;
  out.agent_id = agent.spec.agent_id;
  out.seed = agent.spec.seed;
  try {
    env::Environment training_env(agent.env);
    training_env.attach_corpus(corpus);
    const std::size_t width = agent.ppo.hidden_width;
    auto params = ppo::PolicyParameters::initialize(
        training_env.observation_size(), training_env.action_count(), {width, width},
        agent.spec.seed);
    out.training = ppo::train_agent(training_env, params, agent.ppo, options.train_budget);
    out.train_steps = options.train_budget;

    env::ObfuscationArchive archive;
    env::Environment eval_env(agent.env);
    eval_env.attach_corpus(corpus);
    eval_env.attach_archive(&archive, agent.spec.agent_id, agent.spec.seed);
    out.action_histogram.assign(eval_env.action_count(), 0);
    std::mt19937_64 rng(derive_seed(agent.spec.seed, seed_stream::kEvaluation));
    for (std::size_t episode = 0; episode < options.eval_episodes; ++episode) {
      eval_env.reset_to(episode % eval_env.pool_size());
      bool done = false;
      while (!done) {
        const auto dist = ppo::policy_distribution(params, eval_env.normalized_observation());
        const std::size_t action = options.greedy_evaluation
                                       ? ppo::greedy_action(dist)
                                       : ppo::sample_action(dist, rng).index;
        ++out.action_histogram[action];
        done = eval_env.step(action).done;
        ++out.eval_steps;
      }
      const auto& s = eval_env.state();
      ObfuscationRecord rec;
      rec.agent_id = agent.spec.agent_id;
      rec.seed = agent.spec.seed;
      rec.source_entry_id = s.source_entry_id;
      rec.initial_frequencies = s.initial_observation;
      rec.final_frequencies = s.current_observation;
      rec.initial_p = s.initial_p_nonmal;
      rec.final_p = s.last_p_nonmal;
      rec.steps = s.turns_completed;
      rec.similarity = metrics::try_pearson_similarity(s.initial_observation,
                                                       s.current_observation);
      out.evaluations.push_back(std::move(rec));
    }
    out.policy = std::move(params);
    out.archived = archive.snapshot();
  } catch (const Error& e) {
    out.error = e.what();
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

}  // namespace

CampaignResult run_campaign(std::span<const AgentSpec> specs,
                            std::shared_ptr<const corpus::Corpus> corpus,
                            std::shared_ptr<const ids::IdsModel> ids_model,
                            const CampaignOptions& options) {
  if (!corpus || !ids_model) throw InputError("run_campaign: corpus and IDS are required");
  if (specs.empty()) throw ConfigError("run_campaign: no agents");
  if (ids_model->dimension() != corpus->dimension())
    throw InputError("run_campaign: IDS expects " + std::to_string(ids_model->dimension()) +
                     " opcodes, corpus has " + std::to_string(corpus->dimension()));
  if (corpus->count(corpus::Label::malicious) == 0)
    throw InputError("run_campaign: corpus has no malicious entries");

  std::set<std::string> ids;
  std::vector<ResolvedAgent> agents;
  for (const auto& spec : specs) {
    if (!ids.insert(spec.agent_id).second)
      throw ConfigError("run_campaign: duplicate agent_id " + spec.agent_id);
    agents.push_back(resolve(spec, *corpus, ids_model, options));
  }
  // Deterministic merge order.
  std::sort(agents.begin(), agents.end(),
            [](const auto& a, const auto& b) { return a.spec.agent_id < b.spec.agent_id; });

  const auto start = std::chrono::steady_clock::now();
  CampaignResult result;
  result.agents.resize(agents.size());
  const auto n = static_cast<std::int64_t>(agents.size());
  const int workers = static_cast<int>(std::max<std::size_t>(1, options.workers));
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
  for (std::int64_t k = 0; k < n; ++k) {
    result.agents[static_cast<std::size_t>(k)] =
        run_agent(agents[static_cast<std::size_t>(k)], corpus, options);
  }
  for (const auto& a : result.agents) {
    result.archive.insert(result.archive.end(), a.archived.begin(), a.archived.end());
    result.total_steps += a.train_steps + a.eval_steps;
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

double jensen_shannon_divergence(std::span<const std::size_t> a,
                                 std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw InputError("histograms differ in length");
  double ta = 0.0, tb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ta += static_cast<double>(a[i]);
    tb += static_cast<double>(b[i]);
  }
  if (ta == 0.0 || tb == 0.0) throw InputError("empty action histogram");
  double js = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double p = a[i] / ta;
    const double q = b[i] / tb;
    const double m = 0.5 * (p + q);
    if (p > 0.0) js += 0.5 * p * std::log(p / m);
    if (q > 0.0) js += 0.5 * q * std::log(q / m);
  }
  return std::max(js, 0.0);
}

DissimilarityReport agent_dissimilarity(const CampaignResult& result) {
  std::vector<const AgentOutcome*> agents;
  for (const auto& a : result.agents)
    if (!a.error) agents.push_back(&a);
  if (agents.size() < 2)
    throw InputError("agent_dissimilarity needs at least two successful agents");

  const std::size_t n = agents.size();
  std::vector<std::map<std::string, const ObfuscationRecord*>> first_by_source(n);
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& rec : agents[i]->evaluations)
      first_by_source[i].emplace(rec.source_entry_id, &rec);

  DissimilarityReport report;
  report.shared_sources.assign(n, std::vector<std::size_t>(n, 0));
  report.differing_sources.assign(n, std::vector<std::size_t>(n, 0));
  report.mean_final_similarity.assign(n, std::vector<std::optional<double>>(n));
  report.histogram_divergence.assign(n, std::vector<double>(n, 0.0));
  bool any_shared = false;
  for (std::size_t i = 0; i < n; ++i) {
    report.agent_ids.push_back(agents[i]->agent_id);
    for (std::size_t j = 0; j < n; ++j) {
      double sum = 0.0;
      std::size_t defined = 0;
      for (const auto& [source, rec] : first_by_source[i]) {
        auto it = first_by_source[j].find(source);
        if (it == first_by_source[j].end()) continue;
        ++report.shared_sources[i][j];
        if (!(rec->final_frequencies == it->second->final_frequencies))
          ++report.differing_sources[i][j];
        if (auto s = metrics::try_pearson_similarity(rec->final_frequencies,
                                                     it->second->final_frequencies)) {
          sum += *s;
          ++defined;
        }
      }
      if (defined > 0) report.mean_final_similarity[i][j] = sum / static_cast<double>(defined);
      if (i != j && report.shared_sources[i][j] > 0) any_shared = true;
      report.histogram_divergence[i][j] =
          jensen_shannon_divergence(agents[i]->action_histogram, agents[j]->action_histogram);
    }
  }
  if (!any_shared) throw InputError("agent_dissimilarity: no source shared by two agents");
  return report;
}

nlohmann::ordered_json to_json(const DissimilarityReport& r) {
  nlohmann::ordered_json j;
  j["agent_ids"] = r.agent_ids;
  j["shared_sources"] = r.shared_sources;
  j["differing_sources"] = r.differing_sources;
  nlohmann::ordered_json sim = nlohmann::ordered_json::array();
  for (const auto& row : r.mean_final_similarity) {
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& v : row) cells.push_back(v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json());
    sim.push_back(cells);
  }
  j["mean_final_similarity"] = sim;
  j["histogram_divergence"] = r.histogram_divergence;
  return j;
}

}  // namespace obfuslab::swarm

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "obfuslab/corpus.hpp"
#include "obfuslab/env.hpp"
#include "obfuslab/ids.hpp"
#include "obfuslab/ppo.hpp"
#include "obfuslab/record.hpp"

namespace obfuslab::swarm {

struct AgentSpec {
  std::string agent_id;
  std::uint64_t seed = 0;
  nlohmann::json ppo_overrides = nlohmann::json::object();
  nlohmann::json env_overrides = nlohmann::json::object();

  friend bool operator==(const AgentSpec&, const AgentSpec&) = default;
};

AgentSpec agent_spec_from_json(const nlohmann::json& value);
nlohmann::ordered_json to_json(const AgentSpec& spec);

enum class SeedStrategy { sequential, explicit_list };

// n specs derived from `base`: ids "<base id>-<k>", seeds base.seed + k
// (sequential) or explicit_seeds[k]. Throws ConfigError when n == 0, the
// explicit list has the wrong length, or seeds repeat.
std::vector<AgentSpec> spawn_agents(const AgentSpec& base, std::size_t n,
                                    SeedStrategy strategy,
                                    std::span<const std::uint64_t> explicit_seeds = {});

struct CampaignOptions {
  // Template for every agent; predictor and seed are filled in per agent.
  env::EnvConfig env;
  // Both hidden layers use ppo.hidden_width.
  ppo::PpoConfig ppo;
  std::size_t train_budget = 0;   // environment steps per agent
  std::size_t eval_episodes = 0;  // frozen-policy episodes per agent
  bool greedy_evaluation = false;
  std::size_t workers = 1;
};

struct AgentOutcome {
  std::string agent_id;
  std::uint64_t seed = 0;
  std::vector<ppo::UpdateRecord> training;
  // Every evaluation episode, successful or not, in episode order.
  std::vector<ObfuscationRecord> evaluations;
  // Subset of evaluations that crossed the threshold, as archived by the
  // environment.
  std::vector<ObfuscationRecord> archived;
  std::vector<std::size_t> action_histogram;
  std::size_t train_steps = 0;
  std::size_t eval_steps = 0;
  double wall_seconds = 0.0;
  std::optional<std::string> error;
  std::optional<ppo::PolicyParameters> policy;
};

struct CampaignResult {
  // Successful evaluation episodes, merged in agent order.
  std::vector<ObfuscationRecord> archive;
  std::vector<AgentOutcome> agents;
  double wall_seconds = 0.0;
  std::size_t total_steps = 0;

  std::vector<ObfuscationRecord> all_evaluations() const;
};

// Trains each agent for train_budget steps on its own environment, then runs
// eval_episodes frozen-policy episodes. Episode k starts from malicious pool
// entry k mod pool size, so every agent sees the same sources. A failing
// agent carries an error and does not affect the others. Deterministic for
// fixed seeds regardless of `workers`.
CampaignResult run_campaign(std::span<const AgentSpec> specs,
                            std::shared_ptr<const corpus::Corpus> corpus,
                            std::shared_ptr<const ids::IdsModel> ids_model,
                            const CampaignOptions& options);

struct DissimilarityReport {
  std::vector<std::string> agent_ids;
  // [i][j]: sources evaluated by both agents.
  std::vector<std::vector<std::size_t>> shared_sources;
  // [i][j]: shared sources whose final vectors differ.
  std::vector<std::vector<std::size_t>> differing_sources;
  // [i][j]: mean Pearson similarity of final vectors over shared sources;
  // nullopt when none is defined.
  std::vector<std::vector<std::optional<double>>> mean_final_similarity;
  // [i][j]: Jensen-Shannon divergence (nats) of action-frequency histograms.
  std::vector<std::vector<double>> histogram_divergence;
};

double jensen_shannon_divergence(std::span<const std::size_t> a,
                                 std::span<const std::size_t> b);

// Throws InputError unless at least two agents share a source.
DissimilarityReport agent_dissimilarity(const CampaignResult& result);

nlohmann::ordered_json to_json(const DissimilarityReport& report);

}  // namespace obfuslab::swarm

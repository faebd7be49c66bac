#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "obfuslab/corpus.hpp"
#include "obfuslab/ids.hpp"
#include "obfuslab/record.hpp"

namespace obfuslab::env {

enum class ActionMode {
  // 2 * N_O actions: increase slot k, then decrease slot k.
  increase_and_decrease,
  // N_O actions, increase only.
  increase_only,
};

struct EnvConfig {
  std::size_t max_turns = 100;          // N_T
  std::size_t vocab_cardinality = 0;    // N_O
  std::int32_t increment_step = 5;
  std::optional<double> reward_goal;    // unset: equals max_turns
  double threshold = 0.90;
  std::uint64_t seed = 0;
  double gamma = 0.99;                  // only used for episode bookkeeping
  ActionMode action_mode = ActionMode::increase_and_decrease;
  std::shared_ptr<const ids::Predictor> predictor;

  double goal_reward() const;
  std::size_t action_count() const;
  // Throws ConfigError.
  void validate() const;
};

// Recognised keys: max_turns, increment_step, reward_goal, threshold, gamma,
// action_mode ("increase_and_decrease" | "increase_only"), seed.
void apply_overrides(EnvConfig& config, const nlohmann::json& overrides);
nlohmann::ordered_json to_json(const EnvConfig& config);

// P(non-malicious) - 0.5 up to and including the threshold, goal above it.
double reward_function(double p_non_malicious, double threshold, double goal);

struct EnvState {
  corpus::FeatureVector current_observation;
  corpus::FeatureVector initial_observation;
  std::string source_entry_id;
  double initial_p_nonmal = 0.0;
  double last_p_nonmal = 0.0;
  std::size_t turns_completed = 0;
  double total_episode_reward = 0.0;
  double total_discounted_episode_reward = 0.0;
  bool is_episode_complete = true;
  bool goal_reached = false;
};

struct StepInfo {
  double p_nonmal = 0.0;
  bool action_accepted = false;
  std::size_t turns_completed = 0;
  bool goal_reached = false;
};

struct StepResult {
  double reward = 0.0;
  corpus::FeatureVector observation;
  bool done = false;
  StepInfo info;
};

// Append-only store of successful obfuscations; appends are serialized.
class ObfuscationArchive {
 public:
  void append(ObfuscationRecord record);
  std::vector<ObfuscationRecord> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::vector<ObfuscationRecord> records_;
};

// The obfuscation MDP. Single-threaded; run one instance per worker.
class Environment {
 public:
  // Throws ConfigError on an invalid config or a predictor whose dimension
  // differs from vocab_cardinality.
  explicit Environment(EnvConfig config);

  // Uses the malicious entries as the episode pool.
  void attach_corpus(std::shared_ptr<const corpus::Corpus> corpus);
  // Successful episodes are appended to `archive` (nullptr detaches).
  void attach_archive(ObfuscationArchive* archive, std::string agent_id,
                      std::uint64_t agent_seed);

  // Starts an episode on a uniformly drawn malicious entry.
  corpus::FeatureVector reset();
  // Starts an episode on the pool entry at `pool_index`.
  corpus::FeatureVector reset_to(std::size_t pool_index);

  // Resets first when the current episode is complete. Throws InputError on
  // an out-of-range action.
  StepResult step(std::size_t action_index);

  const EnvConfig& config() const { return config_; }
  const EnvState& state() const { return state_; }
  std::size_t observation_size() const { return config_.vocab_cardinality; }
  std::size_t action_count() const { return config_.action_count(); }
  std::size_t pool_size() const { return pool_.size(); }
  const corpus::CorpusEntry& pool_entry(std::size_t pool_index) const;

  // Current observation divided by 10000.
  std::vector<double> normalized_observation() const;

 private:
  corpus::FeatureVector start_episode(std::size_t pool_index);

  EnvConfig config_;
  std::mt19937_64 rng_;
  std::shared_ptr<const corpus::Corpus> corpus_;
  std::vector<std::size_t> pool_;
  EnvState state_;
  ObfuscationArchive* archive_ = nullptr;
  std::string agent_id_;
  std::uint64_t agent_seed_ = 0;
};

}  // namespace obfuslab::env

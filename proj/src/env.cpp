#include "obfuslab/env.hpp"

#include <algorithm>
#include <cmath>

#include "obfuslab/errors.hpp"
#include "obfuslab/metrics.hpp"

namespace obfuslab::env {

double EnvConfig::goal_reward() const {
  return reward_goal.value_or(static_cast<double>(max_turns));
}

std::size_t EnvConfig::action_count() const {
  return action_mode == ActionMode::increase_only ? vocab_cardinality : 2 * vocab_cardinality;
}

void EnvConfig::validate() const {
  if (max_turns == 0) throw ConfigError("env: max_turns must be at least 1");
  if (vocab_cardinality < 2) throw ConfigError("env: vocab_cardinality must be at least 2");
  if (increment_step < 1 || increment_step > corpus::kMaxFrequency)
    throw ConfigError("env: increment_step must lie in [1, 10000]");
  if (!(threshold > 0.5 && threshold < 1.0))
    throw ConfigError("env: threshold must lie in (0.5, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("env: gamma must lie in (0, 1]");
  // Any non-goal episode collects at most max_turns * 0.5.
  if (!(goal_reward() > 0.5 * static_cast<double>(max_turns)))
    throw ConfigError("env: reward_goal must exceed max_turns * 0.5");
  if (!predictor) throw ConfigError("env: no predictor configured");
  if (predictor->dimension() != vocab_cardinality)
    throw ConfigError("env: predictor expects " + std::to_string(predictor->dimension()) +
                      " opcodes but vocab_cardinality is " +
                      std::to_string(vocab_cardinality));
}

void apply_overrides(EnvConfig& config, const nlohmann::json& overrides) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw ConfigError("env overrides must be an object");
  try {
    for (const auto& [key, value] : overrides.items()) {
      if (key == "max_turns") config.max_turns = value.get<std::size_t>();
      else if (key == "increment_step") config.increment_step = value.get<std::int32_t>();
      else if (key == "reward_goal") {
        if (value.is_null() || value == "auto") config.reward_goal.reset();
        else config.reward_goal = value.get<double>();
      } else if (key == "threshold") config.threshold = value.get<double>();
      else if (key == "gamma") config.gamma = value.get<double>();
      else if (key == "seed") config.seed = value.get<std::uint64_t>();
      else if (key == "action_mode") {
        const auto mode = value.get<std::string>();
        if (mode == "increase_and_decrease") config.action_mode = ActionMode::increase_and_decrease;
        else if (mode == "increase_only") config.action_mode = ActionMode::increase_only;
        else throw ConfigError("env: unknown action_mode \"" + mode + "\"");
      } else {
        throw ConfigError("env: unknown setting \"" + key + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("env: bad setting value: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const EnvConfig& c) {
  nlohmann::ordered_json j;
  j["max_turns"] = c.max_turns;
  j["increment_step"] = c.increment_step;
  j["reward_goal"] = c.goal_reward();
  j["threshold"] = c.threshold;
  j["gamma"] = c.gamma;
  j["action_mode"] = c.action_mode == ActionMode::increase_only ? "increase_only"
                                                                : "increase_and_decrease";
  return j;
}

double reward_function(double p_non_malicious, double threshold, double goal) {
  return p_non_malicious <= threshold ? p_non_malicious - 0.5 : goal;
}

void ObfuscationArchive::append(ObfuscationRecord record) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(record));
}

std::vector<ObfuscationRecord> ObfuscationArchive::snapshot() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::size_t ObfuscationArchive::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  config_.validate();
  rng_.seed(config_.seed);
}

void Environment::attach_corpus(std::shared_ptr<const corpus::Corpus> corpus) {
  if (!corpus) throw InputError("env: null corpus");
  if (corpus->dimension() != config_.vocab_cardinality)
    throw InputError("env: corpus has " + std::to_string(corpus->dimension()) +
                     " opcodes, environment expects " +
                     std::to_string(config_.vocab_cardinality));
  pool_ = corpus->indices_of(corpus::Label::malicious);
  corpus_ = std::move(corpus);
  state_ = EnvState{};
}

void Environment::attach_archive(ObfuscationArchive* archive, std::string agent_id,
                                 std::uint64_t agent_seed) {
  archive_ = archive;
  agent_id_ = std::move(agent_id);
  agent_seed_ = agent_seed;
}

const corpus::CorpusEntry& Environment::pool_entry(std::size_t pool_index) const {
  if (pool_index >= pool_.size()) throw InputError("env: pool index out of range");
  return corpus_->entries()[pool_[pool_index]];
}

corpus::FeatureVector Environment::reset() {
  if (pool_.empty()) throw InputError("env: no malicious entries to start an episode from");
  std::uniform_int_distribution<std::size_t> pick(0, pool_.size() - 1);
  return start_episode(pick(rng_));
}

corpus::FeatureVector Environment::reset_to(std::size_t pool_index) {
  if (pool_.empty()) throw InputError("env: no malicious entries to start an episode from");
  return start_episode(pool_index);
}

corpus::FeatureVector Environment::start_episode(std::size_t pool_index) {
  const auto& entry = pool_entry(pool_index);
  state_ = EnvState{};
  state_.initial_observation = entry.vector;
  state_.current_observation = entry.vector;
  state_.source_entry_id = entry.id;
  state_.initial_p_nonmal = config_.predictor->predict_non_malicious(entry.vector);
  state_.last_p_nonmal = state_.initial_p_nonmal;
  state_.is_episode_complete = false;
  return state_.current_observation;
}

StepResult Environment::step(std::size_t action_index) {
  if (action_index >= action_count())
    throw InputError("env: action " + std::to_string(action_index) + " outside [0, " +
                     std::to_string(action_count()) + ")");
  if (state_.is_episode_complete) reset();

  const std::size_t n = config_.vocab_cardinality;
  auto& obs = state_.current_observation;
  bool accepted = false;
  if (action_index < n) {
    const auto before = obs[action_index];
    const auto after = std::min(before + config_.increment_step, corpus::kMaxFrequency);
    obs.set(action_index, after);
    accepted = after != before;
  } else {
    const std::size_t slot = action_index - n;
    const auto lowered = obs[slot] - config_.increment_step;
    // Net-increase rule: never below the original frequency.
    if (lowered >= state_.initial_observation[slot]) {
      obs.set(slot, lowered);
      accepted = true;
    }
  }

  const double p = config_.predictor->predict_non_malicious(obs);
  const double goal = config_.goal_reward();
  const double reward = reward_function(p, config_.threshold, goal);
  const bool reached = p > config_.threshold;

  state_.total_episode_reward += reward;
  state_.total_discounted_episode_reward +=
      std::pow(config_.gamma, static_cast<double>(state_.turns_completed)) * reward;
  ++state_.turns_completed;
  state_.last_p_nonmal = p;
  state_.goal_reached = reached;

  const bool done = reached || state_.turns_completed >= config_.max_turns;
  state_.is_episode_complete = done;

  if (reached && archive_ != nullptr) {
    ObfuscationRecord rec;
    rec.agent_id = agent_id_;
    rec.seed = agent_seed_;
    rec.source_entry_id = state_.source_entry_id;
    rec.initial_frequencies = state_.initial_observation;
    rec.final_frequencies = obs;
    rec.initial_p = state_.initial_p_nonmal;
    rec.final_p = p;
    rec.steps = state_.turns_completed;
    rec.similarity = metrics::try_pearson_similarity(state_.initial_observation, obs);
    archive_->append(std::move(rec));
  }

  StepResult result;
  result.reward = reward;
  result.observation = obs;
  result.done = done;
  result.info = {p, accepted, state_.turns_completed, reached};
  return result;
}

std::vector<double> Environment::normalized_observation() const {
  return state_.current_observation.normalized();
}

}  // namespace obfuslab::env

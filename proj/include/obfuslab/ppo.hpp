#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "obfuslab/env.hpp"
#include "obfuslab/mlp.hpp"

namespace obfuslab::ppo {

struct PpoConfig {
  double clip = 0.2;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  std::size_t rollout_horizon = 2048;
  std::size_t minibatch_size = 256;
  std::size_t update_epochs = 4;
  double learning_rate = 3e-4;
  double entropy_coeff = 0.01;
  double value_coeff = 0.5;
  double max_grad_norm = 0.5;  // per network; <= 0 disables
  // Agent-side reward multiplier applied before advantage estimation.
  double reward_scale = 1.0;
  std::size_t hidden_width = 64;
  std::uint64_t seed = 0;

  // Throws ConfigError.
  void validate() const;
};

// Recognised keys are the PpoConfig field names.
void apply_overrides(PpoConfig& config, const nlohmann::json& overrides);
nlohmann::ordered_json to_json(const PpoConfig& config);

// Actor [obs -> h -> h -> actions] with a softmax head and critic
// [obs -> h -> h -> 1], tanh hidden layers, plus their optimizer state.
struct PolicyParameters {
  nn::Mlp actor;
  nn::Mlp critic;
  nn::Adam actor_optimizer;
  nn::Adam critic_optimizer;
  std::uint64_t update_count = 0;

  // Orthogonal init: hidden gain sqrt(2), actor head 0.01, critic head 1.
  static PolicyParameters initialize(std::size_t observation_size, std::size_t action_count,
                                     std::vector<std::size_t> hidden, std::uint64_t seed);

  std::size_t observation_size() const { return actor.input_size(); }
  std::size_t action_count() const { return actor.output_size(); }
  bool all_finite() const { return actor.all_finite() && critic.all_finite(); }

  friend bool operator==(const PolicyParameters&, const PolicyParameters&) = default;
};

// Numerically stable softmax / log-softmax of one logit row.
void softmax(std::span<const double> logits, std::span<double> probs);
void log_softmax(std::span<const double> logits, std::span<double> log_probs);

// Throws InputError on a dimension mismatch.
std::vector<double> policy_distribution(const PolicyParameters& params,
                                        std::span<const double> observation);
double state_value(const PolicyParameters& params, std::span<const double> observation);

struct SampledAction {
  std::size_t index = 0;
  double log_prob = 0.0;
};

// Inverse-CDF draw. Throws InputError on an empty or non-normalised
// distribution.
SampledAction sample_action(std::span<const double> distribution, std::mt19937_64& rng);
std::size_t greedy_action(std::span<const double> distribution);

struct EpisodeSummary {
  double total_reward = 0.0;
  double total_discounted_reward = 0.0;
  std::size_t length = 0;
  double initial_p = 0.0;
  double final_p = 0.0;
  bool goal_reached = false;
};

struct RolloutBuffer {
  std::size_t observation_size = 0;
  std::vector<double> observations;  // [size x observation_size]
  std::vector<std::size_t> actions;
  std::vector<double> log_probs_old;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<std::uint8_t> dones;
  std::vector<double> advantages;
  std::vector<double> returns;
  double last_value = 0.0;  // V of the observation after the final transition
  std::vector<EpisodeSummary> completed_episodes;

  std::size_t size() const { return actions.size(); }
  std::span<const double> observation(std::size_t t) const {
    return {observations.data() + t * observation_size, observation_size};
  }
};

// Runs `horizon` environment steps with the current policy, resetting after
// every finished episode.
RolloutBuffer collect_rollout(env::Environment& environment, const PolicyParameters& params,
                              std::size_t horizon, std::mt19937_64& rng);

// Generalized advantage estimation; done transitions do not bootstrap.
void compute_advantages(RolloutBuffer& buffer, double gamma, double lambda);

// min(r * A, clip(r, 1 - eps, 1 + eps) * A)
double clipped_surrogate(double ratio, double advantage, double clip);

// Borrowed view over one minibatch.
struct BatchView {
  std::span<const double> observations;  // [size x observation_size]
  std::span<const std::size_t> actions;
  std::span<const double> log_probs_old;
  std::span<const double> advantages;
  std::span<const double> returns;
  std::size_t size = 0;
};

struct ActorLoss {
  double loss = 0.0;
  double surrogate = 0.0;  // mean clipped surrogate (maximised)
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
};

// loss = -mean(clipped surrogate) - entropy_coeff * mean(entropy). Adds
// dloss/dtheta into `grads` when it is non-null.
ActorLoss actor_loss(const nn::Mlp& actor, const BatchView& batch, double clip,
                     double entropy_coeff, nn::Gradients* grads);

// value_coeff * mean((V - return)^2).
double critic_loss(const nn::Mlp& critic, const BatchView& batch, double value_coeff,
                   nn::Gradients* grads);

struct UpdateDiagnostics {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  std::size_t minibatches = 0;
};

// Clipped-surrogate update over shuffled minibatches for update_epochs
// epochs, advantages normalised per minibatch. Throws TrainingError on a
// non-finite loss or parameter; `params` is left unchanged in that case.
UpdateDiagnostics ppo_update(PolicyParameters& params, const RolloutBuffer& buffer,
                             const PpoConfig& config, std::mt19937_64& rng);

struct SyntheticBatch {
  std::size_t observation_size = 0;
  std::vector<double> observations;
  std::vector<std::size_t> actions;
  std::vector<double> log_probs_old;
  std::vector<double> advantages;
  std::vector<double> returns;

  BatchView view() const;
};

// Random batch whose importance ratios sit well inside or well outside the
// clip band, so the loss is smooth around the current parameters.
SyntheticBatch make_synthetic_batch(const PolicyParameters& params, std::size_t size,
                                    double clip, std::mt19937_64& rng);

struct GradientCheckReport {
  double actor_max_relative_error = 0.0;
  double critic_max_relative_error = 0.0;
  double actor_max_abs_analytic = 0.0;
  double actor_max_abs_numeric = 0.0;
  double critic_max_abs_analytic = 0.0;
  double critic_max_abs_numeric = 0.0;
};

// Central differences with step h over every parameter. Relative error is
// |a - n| / max(|a|, |n|, floor).
GradientCheckReport gradient_check(const PolicyParameters& params, const SyntheticBatch& batch,
                                   double clip, double entropy_coeff, double value_coeff,
                                   double h = 1e-5, double floor = 1e-6);

struct UpdateRecord {
  std::size_t update = 0;
  std::size_t steps = 0;
  double mean_reward = 0.0;
  std::size_t episodes = 0;
  std::optional<double> mean_episode_reward;
  std::optional<double> mean_discounted_episode_reward;
  std::optional<double> mean_episode_length;
  std::optional<double> goal_rate;
  std::optional<double> mean_final_p;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

nlohmann::ordered_json to_json(const UpdateRecord& record);

using MetricsSink = std::function<void(const UpdateRecord&)>;

// Collect / estimate / update until `total_steps` environment steps have
// been taken (the last rollout is shortened to fit the budget).
std::vector<UpdateRecord> train_agent(env::Environment& environment, PolicyParameters& params,
                                      const PpoConfig& config, std::size_t total_steps,
                                      const MetricsSink& sink = {});

std::string encode_agent(const PolicyParameters& params, const PpoConfig& config);
PolicyParameters decode_agent(std::string_view bytes, PpoConfig* config = nullptr,
                              std::string_view source = "<agent>");
void save_agent(const PolicyParameters& params, const PpoConfig& config,
                const std::filesystem::path& path);
PolicyParameters load_agent(const std::filesystem::path& path, PpoConfig* config = nullptr);

}  // namespace obfuslab::ppo

#include "obfuslab/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "obfuslab/errors.hpp"
#include "obfuslab/io.hpp"
#include "obfuslab/random.hpp"

namespace obfuslab::ppo {

void PpoConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo: clip must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("ppo: gamma must lie in (0, 1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0))
    throw ConfigError("ppo: gae_lambda must lie in (0, 1]");
  if (rollout_horizon == 0) throw ConfigError("ppo: rollout_horizon must be positive");
  if (minibatch_size == 0) throw ConfigError("ppo: minibatch_size must be positive");
  if (update_epochs == 0) throw ConfigError("ppo: update_epochs must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo: learning_rate must be positive");
  if (!(entropy_coeff >= 0.0)) throw ConfigError("ppo: entropy_coeff must be non-negative");
  if (!(value_coeff > 0.0)) throw ConfigError("ppo: value_coeff must be positive");
  if (!(reward_scale > 0.0)) throw ConfigError("ppo: reward_scale must be positive");
  if (hidden_width == 0) throw ConfigError("ppo: hidden_width must be positive");
}

void apply_overrides(PpoConfig& c, const nlohmann::json& overrides) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw ConfigError("ppo overrides must be an object");
  try {
    for (const auto& [key, value] : overrides.items()) {
      if (key == "clip") c.clip = value.get<double>();
      else if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "gae_lambda") c.gae_lambda = value.get<double>();
      else if (key == "rollout_horizon") c.rollout_horizon = value.get<std::size_t>();
      else if (key == "minibatch_size") c.minibatch_size = value.get<std::size_t>();
      else if (key == "update_epochs") c.update_epochs = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "entropy_coeff") c.entropy_coeff = value.get<double>();
      else if (key == "value_coeff") c.value_coeff = value.get<double>();
      else if (key == "max_grad_norm") c.max_grad_norm = value.get<double>();
      else if (key == "reward_scale") c.reward_scale = value.get<double>();
      else if (key == "hidden_width") c.hidden_width = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else throw ConfigError("ppo: unknown setting \"" + key + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("ppo: bad setting value: ") + e.what());
  }
}

nlohmann::ordered_json to_json(const PpoConfig& c) {
  nlohmann::ordered_json j;
  j["clip"] = c.clip;
  j["gamma"] = c.gamma;
  j["gae_lambda"] = c.gae_lambda;
  j["rollout_horizon"] = c.rollout_horizon;
  j["minibatch_size"] = c.minibatch_size;
  j["update_epochs"] = c.update_epochs;
  j["learning_rate"] = c.learning_rate;
  j["entropy_coeff"] = c.entropy_coeff;
  j["value_coeff"] = c.value_coeff;
  j["max_grad_norm"] = c.max_grad_norm;
  j["reward_scale"] = c.reward_scale;
  j["hidden_width"] = c.hidden_width;
  j["seed"] = c.seed;
  return j;
}

PolicyParameters PolicyParameters::initialize(std::size_t observation_size,
                                              std::size_t action_count,
                                              std::vector<std::size_t> hidden,
                                              std::uint64_t seed) {
  if (observation_size == 0 || action_count < 2)
    throw ConfigError("policy needs a non-empty observation and at least two actions");
  std::vector<std::size_t> actor_widths{observation_size};
  actor_widths.insert(actor_widths.end(), hidden.begin(), hidden.end());
  auto critic_widths = actor_widths;
  actor_widths.push_back(action_count);
  critic_widths.push_back(1);

  std::mt19937_64 rng(derive_seed(seed, seed_stream::kPolicyInit));
  PolicyParameters p;
  p.actor = nn::Mlp(actor_widths);
  p.critic = nn::Mlp(critic_widths);
  p.actor.init_orthogonal(rng, std::sqrt(2.0), 0.01);
  p.critic.init_orthogonal(rng, std::sqrt(2.0), 1.0);
  p.actor_optimizer = nn::Adam(p.actor);
  p.critic_optimizer = nn::Adam(p.critic);
  return p;
}

void log_softmax(std::span<const double> logits, std::span<double> log_probs) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - peak);
  const double log_norm = peak + std::log(sum);
  for (std::size_t i = 0; i < logits.size(); ++i) log_probs[i] = logits[i] - log_norm;
}

void softmax(std::span<const double> logits, std::span<double> probs) {
  log_softmax(logits, probs);
  for (double& p : probs) p = std::exp(p);
}

std::vector<double> policy_distribution(const PolicyParameters& params,
                                        std::span<const double> observation) {
  const auto logits = params.actor.forward(observation);
  std::vector<double> probs(logits.size());
  softmax(logits, probs);
  return probs;
}

double state_value(const PolicyParameters& params, std::span<const double> observation) {
  return params.critic.forward(observation)[0];
}

SampledAction sample_action(std::span<const double> distribution, std::mt19937_64& rng) {
  if (distribution.empty()) throw InputError("sample_action: empty distribution");
  double total = 0.0;
  for (double p : distribution) {
    if (!(p >= 0.0)) throw InputError("sample_action: negative or NaN probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-6) throw InputError("sample_action: probabilities do not sum to 1");
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng) * total;
  double cumulative = 0.0;
  std::size_t chosen = distribution.size();
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < distribution.size(); ++i) {
    if (distribution[i] <= 0.0) continue;
    last_positive = i;
    cumulative += distribution[i];
    if (u < cumulative) {
      chosen = i;
      break;
    }
  }
  if (chosen == distribution.size()) chosen = last_positive;
  return {chosen, std::log(distribution[chosen])};
}

std::size_t greedy_action(std::span<const double> distribution) {
  return static_cast<std::size_t>(
      std::max_element(distribution.begin(), distribution.end()) - distribution.begin());
}

RolloutBuffer collect_rollout(env::Environment& environment, const PolicyParameters& params,
                              std::size_t horizon, std::mt19937_64& rng) {
  if (params.observation_size() != environment.observation_size() ||
      params.action_count() != environment.action_count())
    throw InputError("policy shape (" + std::to_string(params.observation_size()) + " -> " +
                     std::to_string(params.action_count()) +
                     ") does not match the environment (" +
                     std::to_string(environment.observation_size()) + " -> " +
                     std::to_string(environment.action_count()) + ")");
  RolloutBuffer buf;
  const std::size_t dim = environment.observation_size();
  buf.observation_size = dim;
  buf.observations.reserve(horizon * dim);
  buf.actions.reserve(horizon);

  if (environment.state().is_episode_complete) environment.reset();
  auto obs = environment.normalized_observation();
  std::vector<double> log_probs(params.action_count());
  std::vector<double> probs(params.action_count());
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto logits = params.actor.forward(obs);
    log_softmax(logits, log_probs);
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = std::exp(log_probs[i]);
    const auto action = sample_action(probs, rng);
    const double value = params.critic.forward(obs)[0];
    const auto result = environment.step(action.index);

    buf.observations.insert(buf.observations.end(), obs.begin(), obs.end());
    buf.actions.push_back(action.index);
    buf.log_probs_old.push_back(log_probs[action.index]);
    buf.rewards.push_back(result.reward);
    buf.values.push_back(value);
    buf.dones.push_back(result.done ? 1 : 0);

    if (result.done) {
      const auto& s = environment.state();
      buf.completed_episodes.push_back({s.total_episode_reward, s.total_discounted_episode_reward,
                                        s.turns_completed, s.initial_p_nonmal, s.last_p_nonmal,
                                        s.goal_reached});
      environment.reset();
    }
    obs = environment.normalized_observation();
  }
  buf.last_value = params.critic.forward(obs)[0];
  return buf;
}

void compute_advantages(RolloutBuffer& buffer, double gamma, double lambda) {
  const std::size_t n = buffer.size();
  buffer.advantages.assign(n, 0.0);
  buffer.returns.assign(n, 0.0);
  double gae = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double next_value = t + 1 == n ? buffer.last_value : buffer.values[t + 1];
    const double not_done = buffer.dones[t] ? 0.0 : 1.0;
    const double delta = buffer.rewards[t] + gamma * next_value * not_done - buffer.values[t];
    gae = delta + gamma * lambda * not_done * gae;
    buffer.advantages[t] = gae;
    buffer.returns[t] = gae + buffer.values[t];
  }
}

double clipped_surrogate(double ratio, double advantage, double clip) {
  const double unclipped = ratio * advantage;
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage;
  return std::min(unclipped, clipped);
}

ActorLoss actor_loss(const nn::Mlp& actor, const BatchView& batch, double clip,
                     double entropy_coeff, nn::Gradients* grads) {
  const std::size_t n = batch.size;
  const std::size_t k = actor.output_size();
  nn::Workspace ws;
  actor.forward(batch.observations, n, ws);
  const auto logits = ws.output();

  std::vector<double> grad_out(grads ? n * k : 0);
  std::vector<double> log_probs(k);
  ActorLoss out;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    log_softmax(logits.subspan(b * k, k), log_probs);
    double entropy = 0.0;
    for (double lp : log_probs) entropy -= std::exp(lp) * lp;
    const std::size_t a = batch.actions[b];
    const double log_ratio = log_probs[a] - batch.log_probs_old[b];
    const double ratio = std::exp(log_ratio);
    const double adv = batch.advantages[b];
    const double unclipped = ratio * adv;
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * adv;

    out.surrogate += std::min(unclipped, clipped);
    out.entropy += entropy;
    out.approx_kl += -log_ratio;
    if (std::abs(ratio - 1.0) > clip) out.clip_fraction += 1.0;

    if (grads) {
      // d(surrogate)/d(log pi(a)); zero where the clipped branch is active.
      const double g = unclipped <= clipped ? unclipped : 0.0;
      double* row = grad_out.data() + b * k;
      for (std::size_t i = 0; i < k; ++i) {
        const double p = std::exp(log_probs[i]);
        const double dlogp = (i == a ? 1.0 : 0.0) - p;
        const double dentropy = -p * (log_probs[i] + entropy);
        row[i] = (-g * dlogp - entropy_coeff * dentropy) * inv_n;
      }
    }
  }
  out.surrogate *= inv_n;
  out.entropy *= inv_n;
  out.approx_kl *= inv_n;
  out.clip_fraction *= inv_n;
  out.loss = -out.surrogate - entropy_coeff * out.entropy;
  if (grads) actor.backward(ws, grad_out, *grads);
  return out;
}

double critic_loss(const nn::Mlp& critic, const BatchView& batch, double value_coeff,
                   nn::Gradients* grads) {
  const std::size_t n = batch.size;
  nn::Workspace ws;
  critic.forward(batch.observations, n, ws);
  const auto values = ws.output();
  std::vector<double> grad_out(grads ? n : 0);
  double loss = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double diff = values[b] - batch.returns[b];
    loss += diff * diff;
    if (grads) grad_out[b] = 2.0 * value_coeff * diff * inv_n;
  }
  if (grads) critic.backward(ws, grad_out, *grads);
  return value_coeff * loss * inv_n;
}

namespace {

void clip_gradient_norm(nn::Gradients& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) grads.scale(max_norm / norm);
}

}  // namespace

UpdateDiagnostics ppo_update(PolicyParameters& params, const RolloutBuffer& buffer,
                             const PpoConfig& config, std::mt19937_64& rng) {
  const std::size_t n = buffer.size();
  if (n == 0) throw InputError("ppo_update: empty rollout");
  if (buffer.advantages.size() != n || buffer.returns.size() != n)
    throw InputError("ppo_update: advantages have not been computed");
  const std::size_t dim = buffer.observation_size;
  const std::size_t mb = std::min(config.minibatch_size, n);

  PolicyParameters next = params;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> obs, log_old, adv, ret;
  std::vector<std::size_t> act;
  auto actor_grads = next.actor.make_gradients();
  auto critic_grads = next.critic.make_gradients();
  UpdateDiagnostics diag;

  for (std::size_t epoch = 0; epoch < config.update_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t size = std::min(mb, n - start);
      obs.resize(size * dim);
      act.resize(size);
      log_old.resize(size);
      adv.resize(size);
      ret.resize(size);
      for (std::size_t j = 0; j < size; ++j) {
        const std::size_t t = order[start + j];
        std::copy_n(buffer.observations.begin() + static_cast<std::ptrdiff_t>(t * dim), dim,
                    obs.begin() + static_cast<std::ptrdiff_t>(j * dim));
        act[j] = buffer.actions[t];
        log_old[j] = buffer.log_probs_old[t];
        adv[j] = buffer.advantages[t];
        ret[j] = buffer.returns[t];
      }
      double mean = 0.0;
      for (double a : adv) mean += a;
      mean /= static_cast<double>(size);
      double var = 0.0;
      for (double a : adv) var += (a - mean) * (a - mean);
      const double std_dev = size > 1 ? std::sqrt(var / static_cast<double>(size - 1)) : 0.0;
      for (double& a : adv) a = (a - mean) / (std_dev + 1e-8);

      const BatchView view{obs, act, log_old, adv, ret, size};
      actor_grads.zero();
      critic_grads.zero();
      const auto al = actor_loss(next.actor, view, config.clip, config.entropy_coeff,
                                 &actor_grads);
      const double cl = critic_loss(next.critic, view, config.value_coeff, &critic_grads);
      if (!std::isfinite(al.loss) || !std::isfinite(cl) ||
          !std::isfinite(actor_grads.squared_norm()) ||
          !std::isfinite(critic_grads.squared_norm()))
        throw TrainingError("ppo_update: non-finite loss or gradient (actor loss " +
                            std::to_string(al.loss) + ", critic loss " + std::to_string(cl) +
                            ") at update " + std::to_string(params.update_count));
      clip_gradient_norm(actor_grads, config.max_grad_norm);
      clip_gradient_norm(critic_grads, config.max_grad_norm);
      next.actor_optimizer.step(next.actor, actor_grads, config.learning_rate);
      next.critic_optimizer.step(next.critic, critic_grads, config.learning_rate);

      diag.actor_loss += al.loss;
      diag.critic_loss += cl;
      diag.entropy += al.entropy;
      diag.clip_fraction += al.clip_fraction;
      diag.approx_kl += al.approx_kl;
      ++diag.minibatches;
    }
  }
  if (!next.all_finite())
    throw TrainingError("ppo_update: parameters became non-finite at update " +
                        std::to_string(params.update_count));
  const double m = static_cast<double>(diag.minibatches);
  diag.actor_loss /= m;
  diag.critic_loss /= m;
  diag.entropy /= m;
  diag.clip_fraction /= m;
  diag.approx_kl /= m;
  ++next.update_count;
  params = std::move(next);
  return diag;
}

BatchView SyntheticBatch::view() const {
  return {observations, actions, log_probs_old, advantages, returns, actions.size()};
}

SyntheticBatch make_synthetic_batch(const PolicyParameters& params, std::size_t size,
                                    double clip, std::mt19937_64& rng) {
  const std::size_t dim = params.observation_size();
  const std::size_t k = params.action_count();
  SyntheticBatch batch;
  batch.observation_size = dim;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  std::vector<double> log_probs(k);
  for (std::size_t b = 0; b < size; ++b) {
    std::vector<double> x(dim);
    for (double& v : x) v = unit(rng);
    const auto logits = params.actor.forward(x);
    log_softmax(logits, log_probs);
    const std::size_t a = pick(rng);
    // Ratios at least 0.25 * clip away from both band edges.
    double ratio;
    const double margin = 0.25 * clip;
    switch (b % 3) {
      case 0: ratio = 1.0 + (unit(rng) * 2.0 - 1.0) * (clip - margin); break;
      case 1: ratio = 1.0 + clip + margin + unit(rng) * clip; break;
      default: ratio = 1.0 - clip - margin - unit(rng) * (1.0 - clip - 2 * margin) * 0.5; break;
    }
    batch.observations.insert(batch.observations.end(), x.begin(), x.end());
    batch.actions.push_back(a);
    batch.log_probs_old.push_back(log_probs[a] - std::log(ratio));
    batch.advantages.push_back(normal(rng));
    batch.returns.push_back(normal(rng));
  }
  return batch;
}

namespace {

struct ErrorTracker {
  double floor;
  double max_relative = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;

  void add(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    max_relative = std::max(max_relative, std::abs(analytic - numeric) / scale);
    max_abs_analytic = std::max(max_abs_analytic, std::abs(analytic));
    max_abs_numeric = std::max(max_abs_numeric, std::abs(numeric));
  }
};

template <typename LossFn>
ErrorTracker check_network(nn::Mlp net, const nn::Gradients& analytic, LossFn loss, double h,
                           double floor) {
  ErrorTracker tracker{floor};
  auto blocks = net.parameter_blocks();
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    const auto& g = k % 2 == 0 ? analytic.weights[k / 2] : analytic.bias[k / 2];
    for (std::size_t i = 0; i < blocks[k].size(); ++i) {
      const double saved = blocks[k][i];
      blocks[k][i] = saved + h;
      const double up = loss(net);
      blocks[k][i] = saved - h;
      const double down = loss(net);
      blocks[k][i] = saved;
      tracker.add(g[i], (up - down) / (2.0 * h));
    }
  }
  return tracker;
}

}  // namespace

GradientCheckReport gradient_check(const PolicyParameters& params, const SyntheticBatch& batch,
                                   double clip, double entropy_coeff, double value_coeff,
                                   double h, double floor) {
  const auto view = batch.view();
  auto actor_grads = params.actor.make_gradients();
  auto critic_grads = params.critic.make_gradients();
  actor_loss(params.actor, view, clip, entropy_coeff, &actor_grads);
  critic_loss(params.critic, view, value_coeff, &critic_grads);

  const auto actor = check_network(
      params.actor, actor_grads,
      [&](const nn::Mlp& net) { return actor_loss(net, view, clip, entropy_coeff, nullptr).loss; },
      h, floor);
  const auto critic = check_network(
      params.critic, critic_grads,
      [&](const nn::Mlp& net) { return critic_loss(net, view, value_coeff, nullptr); }, h,
      floor);
  return {actor.max_relative,     critic.max_relative,     actor.max_abs_analytic,
          actor.max_abs_numeric,  critic.max_abs_analytic, critic.max_abs_numeric};
}

nlohmann::ordered_json to_json(const UpdateRecord& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
  };
  nlohmann::ordered_json j;
  j["update"] = r.update;
  j["steps"] = r.steps;
  j["mean_reward"] = r.mean_reward;
  j["episodes"] = r.episodes;
  j["mean_episode_reward"] = opt(r.mean_episode_reward);
  j["mean_discounted_episode_reward"] = opt(r.mean_discounted_episode_reward);
  j["mean_episode_length"] = opt(r.mean_episode_length);
  j["goal_rate"] = opt(r.goal_rate);
  j["mean_final_p"] = opt(r.mean_final_p);
  j["actor_loss"] = r.actor_loss;
  j["critic_loss"] = r.critic_loss;
  j["entropy"] = r.entropy;
  j["clip_fraction"] = r.clip_fraction;
  return j;
}

std::vector<UpdateRecord> train_agent(env::Environment& environment, PolicyParameters& params,
                                      const PpoConfig& config, std::size_t total_steps,
                                      const MetricsSink& sink) {
  config.validate();
  std::mt19937_64 sampling(derive_seed(config.seed, seed_stream::kSampling));
  std::mt19937_64 shuffling(derive_seed(config.seed, seed_stream::kMinibatch));
  std::vector<UpdateRecord> history;
  std::size_t steps = 0;
  while (steps < total_steps) {
    const std::size_t horizon = std::min(config.rollout_horizon, total_steps - steps);
    auto buffer = collect_rollout(environment, params, horizon, sampling);
    steps += horizon;

    UpdateRecord rec;
    rec.update = params.update_count;
    rec.steps = steps;
    rec.mean_reward = std::accumulate(buffer.rewards.begin(), buffer.rewards.end(), 0.0) /
                      static_cast<double>(horizon);
    rec.episodes = buffer.completed_episodes.size();
    if (rec.episodes > 0) {
      double total = 0.0, discounted = 0.0, length = 0.0, goals = 0.0, final_p = 0.0;
      for (const auto& e : buffer.completed_episodes) {
        total += e.total_reward;
        discounted += e.total_discounted_reward;
        length += static_cast<double>(e.length);
        goals += e.goal_reached ? 1.0 : 0.0;
        final_p += e.final_p;
      }
      const double m = static_cast<double>(rec.episodes);
      rec.mean_episode_reward = total / m;
      rec.mean_discounted_episode_reward = discounted / m;
      rec.mean_episode_length = length / m;
      rec.goal_rate = goals / m;
      rec.mean_final_p = final_p / m;
    }

    if (config.reward_scale != 1.0)
      for (double& r : buffer.rewards) r *= config.reward_scale;
    compute_advantages(buffer, config.gamma, config.gae_lambda);
    const auto diag = ppo_update(params, buffer, config, shuffling);
    rec.actor_loss = diag.actor_loss;
    rec.critic_loss = diag.critic_loss;
    rec.entropy = diag.entropy;
    rec.clip_fraction = diag.clip_fraction;
    if (sink) sink(rec);
    history.push_back(rec);
  }
  return history;
}

std::string encode_agent(const PolicyParameters& params, const PpoConfig& config) {
  nlohmann::json header;
  header["kind"] = "ppo_agent";
  header["actor_widths"] = params.actor.widths();
  header["critic_widths"] = params.critic.widths();
  header["update_count"] = params.update_count;
  header["actor_optimizer_steps"] = params.actor_optimizer.steps();
  header["critic_optimizer_steps"] = params.critic_optimizer.steps();
  header["config"] = to_json(config);

  std::vector<std::vector<std::size_t>> shapes;
  std::vector<std::span<const double>> arrays;
  auto add = [&](const nn::Mlp& net, std::vector<std::span<const double>> blocks,
                 bool moments) {
    const auto net_shapes = net.parameter_shapes();
    for (std::size_t k = 0; k < blocks.size(); ++k) {
      shapes.push_back(net_shapes[moments ? k / 2 : k]);
      arrays.push_back(blocks[k]);
    }
  };
  add(params.actor, params.actor.parameter_blocks(), false);
  add(params.critic, params.critic.parameter_blocks(), false);
  add(params.actor, params.actor_optimizer.moment_blocks(), true);
  add(params.critic, params.critic_optimizer.moment_blocks(), true);
  return io::encode_checkpoint(header, shapes, arrays);
}

PolicyParameters decode_agent(std::string_view bytes, PpoConfig* config,
                              std::string_view source) {
  const std::string where(source);
  auto ckpt = io::decode_checkpoint(bytes, "ppo_agent", source);
  const auto& h = ckpt.header;
  PolicyParameters p;
  try {
    p.actor = nn::Mlp(h.at("actor_widths").get<std::vector<std::size_t>>());
    p.critic = nn::Mlp(h.at("critic_widths").get<std::vector<std::size_t>>());
    p.update_count = h.at("update_count").get<std::uint64_t>();
    p.actor_optimizer = nn::Adam(p.actor);
    p.critic_optimizer = nn::Adam(p.critic);
    p.actor_optimizer.set_steps(h.at("actor_optimizer_steps").get<std::uint64_t>());
    p.critic_optimizer.set_steps(h.at("critic_optimizer_steps").get<std::uint64_t>());
    if (config) {
      *config = PpoConfig{};
      apply_overrides(*config, h.at("config"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + ": agent checkpoint header incomplete: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(where + ": " + e.what());
  }
  if (p.actor.input_size() != p.critic.input_size())
    throw CheckpointError(where + ": actor and critic disagree on observation size");

  std::vector<std::span<double>> targets;
  for (auto s : p.actor.parameter_blocks()) targets.push_back(s);
  for (auto s : p.critic.parameter_blocks()) targets.push_back(s);
  for (auto s : p.actor_optimizer.moment_blocks()) targets.push_back(s);
  for (auto s : p.critic_optimizer.moment_blocks()) targets.push_back(s);
  if (targets.size() != ckpt.arrays.size())
    throw CheckpointError(where + ": agent checkpoint has " +
                          std::to_string(ckpt.arrays.size()) + " arrays, expected " +
                          std::to_string(targets.size()));
  for (std::size_t k = 0; k < targets.size(); ++k) {
    if (targets[k].size() != ckpt.arrays[k].size())
      throw CheckpointError(where + ": agent checkpoint array " + std::to_string(k) +
                            " has the wrong shape");
    std::copy(ckpt.arrays[k].begin(), ckpt.arrays[k].end(), targets[k].begin());
  }
  return p;
}

void save_agent(const PolicyParameters& params, const PpoConfig& config,
                const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_agent(params, config));
}

PolicyParameters load_agent(const std::filesystem::path& path, PpoConfig* config) {
  std::string bytes;
  try {
    bytes = io::read_file(path);
  } catch (const InputError& e) {
    throw CheckpointError(e.what());
  }
  return decode_agent(bytes, config, path.string());
}

}  // namespace obfuslab::ppo

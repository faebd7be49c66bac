#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "obfuslab/env.hpp"
#include "obfuslab/errors.hpp"
#include "obfuslab/ppo.hpp"
#include "support.hpp"

using namespace obfuslab;
using namespace obfuslab::ppo;

namespace {

std::vector<double> random_observation(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

env::Environment constant_env(double p, std::size_t turns) {
  env::EnvConfig c;
  c.vocab_cardinality = 3;
  c.max_turns = turns;
  c.seed = 5;
  c.predictor = std::make_shared<testing::ConstantPredictor>(3, p);
  env::Environment e(c);
  e.attach_corpus(std::make_shared<corpus::Corpus>(testing::corpus_of({{1, 2, 3}, {4, 5, 6}})));
  return e;
}

}  // namespace

TEST_SUITE("ppo") {

TEST_CASE("policy distribution is a probability vector") {
  const auto params = PolicyParameters::initialize(6, 12, {8, 8}, 1);
  std::mt19937_64 rng(2);
  const auto obs = random_observation(6, rng);
  const auto p = policy_distribution(params, obs);
  double sum = 0.0;
  for (double x : p) {
    CHECK(x > 0.0);
    CHECK(x < 1.0);
    sum += x;
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
  CHECK(policy_distribution(params, obs) == p);
}

TEST_CASE("zero output layer gives a uniform policy and zero value") {
  auto params = PolicyParameters::initialize(4, 5, {8, 8}, 1);
  for (auto& x : params.actor.layers().back().weights) x = 0.0;
  for (auto& x : params.critic.layers().back().weights) x = 0.0;
  std::mt19937_64 rng(3);
  const auto obs = random_observation(4, rng);
  for (double x : policy_distribution(params, obs)) CHECK(x == doctest::Approx(0.2));
  CHECK(state_value(params, obs) == 0.0);
}

TEST_CASE("value is finite on random nets") {
  std::mt19937_64 rng(4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto params = PolicyParameters::initialize(7, 14, {64, 64}, seed);
    CHECK(std::isfinite(state_value(params, random_observation(7, rng))));
  }
}

TEST_CASE("observation size mismatch is an input error") {
  const auto params = PolicyParameters::initialize(4, 8, {8, 8}, 1);
  CHECK_THROWS_AS(policy_distribution(params, std::vector<double>(3, 0.0)), InputError);
}

TEST_CASE("different seeds give different initial parameters") {
  CHECK_FALSE(PolicyParameters::initialize(4, 8, {8, 8}, 1) ==
              PolicyParameters::initialize(4, 8, {8, 8}, 2));
  CHECK(PolicyParameters::initialize(4, 8, {8, 8}, 1) ==
        PolicyParameters::initialize(4, 8, {8, 8}, 1));
}

TEST_CASE("softmax survives large logits") {
  const std::vector<double> logits{1000.0, 0.0, -1000.0};
  std::vector<double> p(3), lp(3);
  softmax(logits, p);
  log_softmax(logits, lp);
  CHECK(p[0] == doctest::Approx(1.0));
  CHECK(std::isfinite(lp[2]));
  CHECK(lp[0] == doctest::Approx(0.0));
}

TEST_CASE("degenerate distribution always samples its mass") {
  std::mt19937_64 rng(1);
  const std::vector<double> d{1.0, 0.0, 0.0, 0.0};
  for (int k = 0; k < 100; ++k) CHECK(sample_action(d, rng).index == 0);
  CHECK(greedy_action(std::vector<double>{0.1, 0.7, 0.2}) == 1);
}

TEST_CASE("uniform sampling frequencies stay within five sigma") {
  std::mt19937_64 rng(12345);
  const std::size_t k = 8, n = 10000;
  const std::vector<double> d(k, 1.0 / k);
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[sample_action(d, rng).index];
  const double mean = static_cast<double>(n) / k;
  const double sigma = std::sqrt(n * (1.0 / k) * (1.0 - 1.0 / k));
  for (auto c : counts) CHECK(std::abs(c - mean) <= 5.0 * sigma);
}

TEST_CASE("sampling is reproducible and validates its input") {
  const std::vector<double> d{0.2, 0.3, 0.5};
  std::mt19937_64 a(9), b(9);
  for (int k = 0; k < 50; ++k) CHECK(sample_action(d, a).index == sample_action(d, b).index);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(sample_action(std::vector<double>{}, rng), InputError);
  CHECK_THROWS_AS(sample_action(std::vector<double>{0.5, 0.2}, rng), InputError);
}

TEST_CASE("rollout has the requested length") {
  auto e = constant_env(0.1, 100);
  const auto params = PolicyParameters::initialize(3, 6, {8, 8}, 1);
  std::mt19937_64 rng(1);
  const auto buf = collect_rollout(e, params, 8, rng);
  CHECK(buf.size() == 8);
  CHECK(buf.observations.size() == 8 * 3);
  CHECK(buf.rewards.size() == 8);
}

TEST_CASE("episodes ending at the first step mark every transition done") {
  auto e = constant_env(0.95, 100);
  const auto params = PolicyParameters::initialize(3, 6, {8, 8}, 1);
  std::mt19937_64 rng(1);
  const auto buf = collect_rollout(e, params, 5, rng);
  for (auto d : buf.dones) CHECK(d == 1);
  CHECK(buf.completed_episodes.size() == 5);
  for (auto r : buf.rewards) CHECK(r == 100.0);
}

TEST_CASE("rollouts are bit-identical under fixed seeds") {
  auto e1 = constant_env(0.3, 4), e2 = constant_env(0.3, 4);
  const auto params = PolicyParameters::initialize(3, 6, {8, 8}, 1);
  std::mt19937_64 r1(7), r2(7);
  const auto a = collect_rollout(e1, params, 32, r1);
  const auto b = collect_rollout(e2, params, 32, r2);
  CHECK(a.observations == b.observations);
  CHECK(a.actions == b.actions);
  CHECK(a.log_probs_old == b.log_probs_old);
  CHECK(a.rewards == b.rewards);
  CHECK(a.values == b.values);
  CHECK(a.dones == b.dones);
}

TEST_CASE("single transition advantage is the td residual") {
  RolloutBuffer buf;
  buf.rewards = {1.0};
  buf.values = {0.5};
  buf.dones = {0};
  buf.actions = {0};
  buf.last_value = 1.0;
  compute_advantages(buf, 0.99, 0.95);
  CHECK(buf.advantages[0] == doctest::Approx(1.49).epsilon(1e-12));
  CHECK(buf.returns[0] == doctest::Approx(1.99).epsilon(1e-12));
}

TEST_CASE("lambda one without dones gives discounted return minus value") {
  RolloutBuffer buf;
  buf.rewards = {1.0, -0.5, 2.0, 0.25};
  buf.values = {0.3, -0.1, 0.7, 0.2};
  buf.dones = {0, 0, 0, 0};
  buf.actions = {0, 0, 0, 0};
  buf.last_value = 0.4;
  const double g = 0.9;
  compute_advantages(buf, g, 1.0);
  double ret = buf.last_value;
  for (int t = 3; t >= 0; --t) {
    ret = buf.rewards[t] + g * ret;
    CHECK(buf.advantages[t] == doctest::Approx(ret - buf.values[t]).epsilon(1e-12));
  }
}

TEST_CASE("done transitions do not bootstrap") {
  RolloutBuffer buf;
  buf.rewards = {1.0, 2.0};
  buf.values = {0.0, 0.0};
  buf.dones = {1, 0};
  buf.actions = {0, 0};
  buf.last_value = 10.0;
  compute_advantages(buf, 0.5, 1.0);
  CHECK(buf.advantages[0] == doctest::Approx(1.0));
  CHECK(buf.advantages[1] == doctest::Approx(7.0));
}

TEST_CASE("clipped surrogate takes the pessimistic branch") {
  CHECK(clipped_surrogate(1.5, 2.0, 0.2) == doctest::Approx(1.2 * 2.0));
  CHECK(clipped_surrogate(0.5, -2.0, 0.2) == doctest::Approx(0.8 * -2.0));
  CHECK(clipped_surrogate(1.1, 2.0, 0.2) == doctest::Approx(1.1 * 2.0));
  CHECK(clipped_surrogate(0.5, 2.0, 0.2) == doctest::Approx(0.5 * 2.0));
  CHECK(clipped_surrogate(1.5, -2.0, 0.2) == doctest::Approx(1.5 * -2.0));
}

TEST_CASE("clipping is inert when the policy has not moved") {
  const auto params = PolicyParameters::initialize(5, 10, {16, 16}, 3);
  std::mt19937_64 rng(8);
  auto batch = make_synthetic_batch(params, 32, 0.2, rng);
  for (std::size_t i = 0; i < batch.actions.size(); ++i) {
    const auto p = policy_distribution(params, std::span<const double>(
                                                   batch.observations.data() + i * 5, 5));
    batch.log_probs_old[i] = std::log(p[batch.actions[i]]);
  }
  auto g_clip = params.actor.make_gradients();
  auto g_free = params.actor.make_gradients();
  const auto a = actor_loss(params.actor, batch.view(), 0.2, 0.01, &g_clip);
  const auto b = actor_loss(params.actor, batch.view(), 1e9, 0.01, &g_free);
  CHECK(a.clip_fraction == 0.0);
  CHECK(a.loss == doctest::Approx(b.loss).epsilon(1e-14));
  for (std::size_t l = 0; l < g_clip.weights.size(); ++l) {
    CHECK(g_clip.weights[l] == g_free.weights[l]);
    CHECK(g_clip.bias[l] == g_free.bias[l]);
  }
}

TEST_CASE("analytic gradients match central differences") {
  for (std::size_t hidden : {2, 64}) {
    std::mt19937_64 rng(100 + hidden);
    for (int trial = 0; trial < 3; ++trial) {
      const auto params = PolicyParameters::initialize(6, 12, {hidden, hidden}, rng());
      const auto batch = make_synthetic_batch(params, 16, 0.2, rng);
      const auto report = gradient_check(params, batch, 0.2, 0.01, 0.5);
      CHECK(report.actor_max_relative_error < 1e-4);
      CHECK(report.critic_max_relative_error < 1e-4);
    }
  }
}

TEST_CASE("zero advantages and matching returns give null gradients") {
  const auto params = PolicyParameters::initialize(6, 12, {8, 8}, 4);
  std::mt19937_64 rng(4);
  auto batch = make_synthetic_batch(params, 8, 0.2, rng);
  for (auto& a : batch.advantages) a = 0.0;
  for (std::size_t i = 0; i < batch.returns.size(); ++i)
    batch.returns[i] = state_value(
        params, std::span<const double>(batch.observations.data() + i * 6, 6));
  const auto report = gradient_check(params, batch, 0.2, 0.0, 0.5);
  CHECK(report.actor_max_abs_analytic < 1e-12);
  CHECK(report.actor_max_abs_numeric < 1e-8);
  CHECK(report.critic_max_abs_analytic < 1e-12);
  CHECK(report.critic_max_abs_numeric < 1e-8);
}

TEST_CASE("an update moves parameters and keeps them finite") {
  auto e = constant_env(0.3, 10);
  auto params = PolicyParameters::initialize(3, 6, {8, 8}, 1);
  const auto before = params;
  PpoConfig cfg;
  cfg.minibatch_size = 16;
  std::mt19937_64 rng(1);
  auto buf = collect_rollout(e, params, 64, rng);
  compute_advantages(buf, cfg.gamma, cfg.gae_lambda);
  const auto diag = ppo_update(params, buf, cfg, rng);
  CHECK(diag.minibatches == 16);
  CHECK(params.all_finite());
  CHECK_FALSE(params.actor == before.actor);
  CHECK(params.update_count == 1);
}

TEST_CASE("config validation and overrides") {
  PpoConfig c;
  CHECK_NOTHROW(c.validate());
  c.clip = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  PpoConfig d;
  apply_overrides(d, {{"learning_rate", 0.01}, {"rollout_horizon", 64}});
  CHECK(d.learning_rate == 0.01);
  CHECK(d.rollout_horizon == 64);
  CHECK_THROWS_AS(apply_overrides(d, {{"lr", 0.01}}), ConfigError);
}

TEST_CASE("agent checkpoint round trip") {
  auto e = constant_env(0.3, 10);
  auto params = PolicyParameters::initialize(3, 6, {8, 8}, 1);
  PpoConfig cfg;
  cfg.rollout_horizon = 32;
  cfg.minibatch_size = 8;
  cfg.seed = 6;
  train_agent(e, params, cfg, 64);
  testing::TempDir dir;
  save_agent(params, cfg, dir / "a.ckpt");
  PpoConfig loaded_cfg;
  const auto loaded = load_agent(dir / "a.ckpt", &loaded_cfg);
  CHECK(loaded == params);
  CHECK(loaded_cfg.seed == 6);
  CHECK(loaded_cfg.rollout_horizon == 32);
  std::mt19937_64 rng(3);
  for (int k = 0; k < 100; ++k) {
    const auto obs = random_observation(3, rng);
    CHECK(policy_distribution(loaded, obs) == policy_distribution(params, obs));
  }
}

TEST_CASE("corrupted or mismatched agent checkpoints are rejected") {
  const auto params = PolicyParameters::initialize(3, 6, {8, 8}, 1);
  const std::string bytes = encode_agent(params, PpoConfig{});
  CHECK_THROWS_AS(decode_agent(bytes.substr(0, bytes.size() / 2)), CheckpointError);
  std::string flipped = bytes;
  const auto pos = flipped.find("\"version\":1");
  REQUIRE(pos != std::string::npos);
  flipped.replace(pos, 11, "\"version\":2");
  CHECK_THROWS_AS(decode_agent(flipped), CheckpointError);
  CHECK_THROWS_AS(decode_agent("garbage"), CheckpointError);
}

TEST_CASE("training reports one record per update") {
  auto e = constant_env(0.3, 10);
  auto params = PolicyParameters::initialize(3, 6, {8, 8}, 1);
  PpoConfig cfg;
  cfg.rollout_horizon = 32;
  cfg.minibatch_size = 8;
  std::size_t seen = 0;
  const auto records = train_agent(e, params, cfg, 100, [&](const UpdateRecord&) { ++seen; });
  CHECK(records.size() == 4);
  CHECK(seen == 4);
  CHECK(records.back().steps == 100);
}

}

#include <doctest.h>

#include <memory>
#include <vector>

#include "obfuslab/errors.hpp"
#include "obfuslab/swarm.hpp"
#include "support.hpp"

using namespace obfuslab;
using namespace obfuslab::swarm;

namespace {

std::shared_ptr<const corpus::Corpus> small_corpus() {
  return std::make_shared<const corpus::Corpus>(
      corpus::synthesize_corpus(corpus::synthetic_vocabulary(8), 6, 6, 0.9, 2));
}

std::shared_ptr<const ids::IdsModel> constant_model(double bias) {
  return std::make_shared<const ids::IdsModel>(
      ids::IdsModel::logistic(std::vector<double>(8, 0.0), bias));
}

CampaignOptions small_options() {
  CampaignOptions o;
  o.env.max_turns = 5;
  o.ppo.rollout_horizon = 32;
  o.ppo.minibatch_size = 8;
  o.ppo.hidden_width = 8;
  o.train_budget = 64;
  o.eval_episodes = 4;
  return o;
}

}  // namespace

TEST_SUITE("swarm") {

TEST_CASE("sequential spawn") {
  const auto specs = spawn_agents(AgentSpec{"agent", 7}, 3, SeedStrategy::sequential);
  REQUIRE(specs.size() == 3);
  CHECK(specs[0].seed == 7);
  CHECK(specs[1].seed == 8);
  CHECK(specs[2].seed == 9);
  CHECK(specs[0].agent_id != specs[1].agent_id);
  CHECK(specs[1].agent_id != specs[2].agent_id);
}

TEST_CASE("single spawn keeps everything but the id") {
  AgentSpec base{"x", 4, {{"learning_rate", 0.01}}, {{"max_turns", 9}}};
  const auto specs = spawn_agents(base, 1, SeedStrategy::sequential);
  REQUIRE(specs.size() == 1);
  auto renamed = specs[0];
  renamed.agent_id = base.agent_id;
  CHECK(renamed == base);
}

TEST_CASE("explicit seeds and their validation") {
  const std::vector<std::uint64_t> seeds{5, 1, 9};
  const auto specs = spawn_agents(AgentSpec{"a", 0}, 3, SeedStrategy::explicit_list, seeds);
  CHECK(specs[1].seed == 1);
  const std::vector<std::uint64_t> repeated{5, 5};
  CHECK_THROWS_AS(spawn_agents(AgentSpec{"a", 0}, 2, SeedStrategy::explicit_list, repeated),
                  ConfigError);
  CHECK_THROWS_AS(spawn_agents(AgentSpec{"a", 0}, 3, SeedStrategy::explicit_list, repeated),
                  ConfigError);
  CHECK_THROWS_AS(spawn_agents(AgentSpec{"a", 0}, 0, SeedStrategy::sequential), ConfigError);
}

TEST_CASE("agent spec json") {
  const AgentSpec s{"a-1", 3, {{"clip", 0.1}}, {{"max_turns", 4}}};
  CHECK(agent_spec_from_json(nlohmann::json::parse(to_json(s).dump())) == s);
  CHECK_THROWS_AS(agent_spec_from_json({{"agent_id", "a"}, {"colour", 1}}), ConfigError);
  CHECK_THROWS_AS(agent_spec_from_json({{"seed", 1}}), ConfigError);
}

TEST_CASE("every episode succeeds when any action crosses the threshold") {
  const auto specs = spawn_agents(AgentSpec{"agent", 1}, 3, SeedStrategy::sequential);
  const auto result = run_campaign(specs, small_corpus(), constant_model(5.0), small_options());
  CHECK(result.archive.size() == 3 * 4);
  for (const auto& a : result.agents) {
    CHECK_FALSE(a.error.has_value());
    CHECK(a.evaluations.size() == 4);
    for (const auto& r : a.evaluations) CHECK(r.steps == 1);
  }
}

TEST_CASE("evaluation cycles through the malware pool") {
  const auto specs = spawn_agents(AgentSpec{"agent", 1}, 1, SeedStrategy::sequential);
  auto o = small_options();
  o.eval_episodes = 8;
  const auto result = run_campaign(specs, small_corpus(), constant_model(-5.0), o);
  const auto& ev = result.agents[0].evaluations;
  REQUIRE(ev.size() == 8);
  CHECK(ev[0].source_entry_id == ev[6].source_entry_id);
  CHECK(ev[0].source_entry_id != ev[1].source_entry_id);
  CHECK(result.archive.empty());
}

TEST_CASE("campaigns are deterministic regardless of worker count") {
  const auto specs = spawn_agents(AgentSpec{"agent", 11}, 3, SeedStrategy::sequential);
  auto o = small_options();
  const auto c = small_corpus();
  const auto m = constant_model(-1.0);
  const auto a = run_campaign(specs, c, m, o);
  o.workers = 3;
  const auto b = run_campaign(specs, c, m, o);
  CHECK(a.all_evaluations() == b.all_evaluations());
  CHECK(a.archive == b.archive);
  for (std::size_t k = 0; k < a.agents.size(); ++k) {
    CHECK(a.agents[k].action_histogram == b.agents[k].action_histogram);
    CHECK(*a.agents[k].policy == *b.agents[k].policy);
  }
}

TEST_CASE("same seed gives identical histograms and zero divergence") {
  const std::vector<AgentSpec> specs{{"a", 3}, {"b", 3}};
  const auto result = run_campaign(specs, small_corpus(), constant_model(-1.0), small_options());
  CHECK(result.agents[0].action_histogram == result.agents[1].action_histogram);
  const auto report = agent_dissimilarity(result);
  CHECK(report.histogram_divergence[0][1] == 0.0);
  CHECK(report.differing_sources[0][1] == 0);
  CHECK(report.shared_sources[0][1] == 4);
}

TEST_CASE("dissimilarity needs a pair") {
  const std::vector<AgentSpec> specs{{"a", 3}};
  const auto result = run_campaign(specs, small_corpus(), constant_model(-1.0), small_options());
  CHECK_THROWS_AS(agent_dissimilarity(result), InputError);
}

TEST_CASE("jensen shannon divergence") {
  const std::vector<std::size_t> a{1, 0}, b{0, 1}, c{3, 3};
  CHECK(jensen_shannon_divergence(a, a) == 0.0);
  CHECK(jensen_shannon_divergence(a, b) == doctest::Approx(std::log(2.0)));
  CHECK(jensen_shannon_divergence(a, c) == doctest::Approx(jensen_shannon_divergence(c, a)));
  const std::vector<std::size_t> zero{0, 0};
  CHECK_THROWS_AS(jensen_shannon_divergence(a, zero), InputError);
}

TEST_CASE("campaign input validation") {
  const std::vector<AgentSpec> dup{{"a", 1}, {"a", 2}};
  CHECK_THROWS_AS(run_campaign(dup, small_corpus(), constant_model(0.0), small_options()),
                  ConfigError);
  const std::vector<AgentSpec> bad{{"a", 1, {{"clip", -1.0}}, {}}};
  CHECK_THROWS_AS(run_campaign(bad, small_corpus(), constant_model(0.0), small_options()),
                  ConfigError);
  const std::vector<AgentSpec> ok{{"a", 1}};
  auto wrong_dim = std::make_shared<const ids::IdsModel>(
      ids::IdsModel::logistic(std::vector<double>(3, 0.0), 0.0));
  CHECK_THROWS(run_campaign(ok, small_corpus(), wrong_dim, small_options()));
}

}

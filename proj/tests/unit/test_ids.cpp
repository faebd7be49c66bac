#include <doctest.h>

#include <random>
#include <string>
#include <vector>

#include "obfuslab/corpus.hpp"
#include "obfuslab/errors.hpp"
#include "obfuslab/ids.hpp"
#include "obfuslab/io.hpp"
#include "support.hpp"

using namespace obfuslab;
using namespace obfuslab::ids;

namespace {

const corpus::Corpus& separated_corpus() {
  static const auto c =
      corpus::synthesize_corpus(corpus::synthetic_vocabulary(64), 200, 200, 0.9, 7);
  return c;
}

const TrainResult& separated_model() {
  static const auto r = [] {
    TrainOptions opts;
    opts.seed = 7;
    return train_ids(separated_corpus(), opts);
  }();
  return r;
}

corpus::FeatureVector random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(0, 10000);
  std::vector<std::int32_t> v(n);
  for (auto& x : v) x = d(rng);
  return corpus::FeatureVector(v);
}

}  // namespace

TEST_SUITE("ids") {

TEST_CASE("zero logistic model predicts one half") {
  const auto m = IdsModel::logistic(std::vector<double>(5, 0.0), 0.0);
  std::mt19937_64 rng(1);
  for (int k = 0; k < 10; ++k) CHECK(m.predict_non_malicious(random_vector(5, rng)) == 0.5);
}

TEST_CASE("logistic model evaluates sigmoid of the affine score") {
  std::vector<double> w(4, 0.0);
  w[0] = 2.0;
  const auto m = IdsModel::logistic(w, 0.0);
  // 5000 / 10000 = 0.5 on the first slot
  const double p = m.predict_non_malicious(corpus::FeatureVector({5000, 0, 0, 0}));
  CHECK(p == doctest::Approx(0.7310585786300049).epsilon(1e-12));
}

TEST_CASE("sigmoid is stable at the extremes") {
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) == 0.0);
  CHECK(sigmoid(0.0) == 0.5);
}

TEST_CASE("prediction rejects a wrong dimension") {
  const auto m = IdsModel::logistic(std::vector<double>(3, 0.0), 0.0);
  CHECK_THROWS_AS(m.predict_non_malicious(corpus::FeatureVector({1, 2})), InputError);
}

TEST_CASE("high separation model is accurate and confident on malware") {
  const auto& r = separated_model();
  CHECK(r.metrics.accuracy >= 0.95);
  CHECK(r.metrics.n_eval == 80);
  for (auto i : r.train_indices) {
    const auto& e = separated_corpus().entries()[i];
    if (e.label == corpus::Label::malicious)
      CHECK(r.model.predict_non_malicious(e.vector) <= 0.1);
  }
}

TEST_CASE("indistinguishable classes give chance accuracy") {
  const auto c = corpus::synthesize_corpus(corpus::synthetic_vocabulary(64), 200, 200, 0.0, 7);
  TrainOptions opts;
  opts.seed = 7;
  const auto r = train_ids(c, opts);
  CHECK(r.metrics.accuracy >= 0.4);
  CHECK(r.metrics.accuracy <= 0.6);
}

TEST_CASE("split is stratified and disjoint") {
  const auto& r = separated_model();
  CHECK(r.train_indices.size() + r.eval_indices.size() == 400);
  std::size_t mal = 0;
  for (auto i : r.eval_indices)
    if (separated_corpus().entries()[i].label == corpus::Label::malicious) ++mal;
  CHECK(mal == 40);
  for (auto i : r.eval_indices)
    CHECK(std::find(r.train_indices.begin(), r.train_indices.end(), i) == r.train_indices.end());
}

TEST_CASE("one-class corpus is rejected") {
  const auto c = testing::corpus_of({{1, 2}, {3, 4}, {5, 6}});
  CHECK_THROWS_AS(train_ids(c, TrainOptions{}), TrainingError);
}

TEST_CASE("mlp kind trains on separated data") {
  TrainOptions opts;
  opts.kind = ModelKind::mlp;
  opts.seed = 3;
  const auto r = train_ids(separated_corpus(), opts);
  CHECK(r.model.kind() == ModelKind::mlp);
  CHECK(r.metrics.accuracy >= 0.9);
}

TEST_CASE("checkpoint round trip preserves predictions") {
  const auto& m = separated_model().model;
  testing::TempDir dir;
  save_ids(m, dir / "ids.ckpt");
  const auto loaded = load_ids(dir / "ids.ckpt");
  std::mt19937_64 rng(5);
  for (int k = 0; k < 100; ++k) {
    const auto v = random_vector(64, rng);
    CHECK(loaded.predict_non_malicious(v) == m.predict_non_malicious(v));
  }
}

TEST_CASE("truncated checkpoint is rejected") {
  const std::string bytes = encode_ids(separated_model().model);
  CHECK_THROWS_AS(decode_ids(bytes.substr(0, bytes.size() - 3)), CheckpointError);
  CHECK_THROWS_AS(decode_ids(bytes.substr(0, bytes.find('\n'))), CheckpointError);
  CHECK_THROWS_AS(decode_ids(bytes + "x"), CheckpointError);
  CHECK_THROWS_AS(decode_ids(""), CheckpointError);
}

TEST_CASE("wrong checkpoint version names both versions") {
  std::string bytes = encode_ids(separated_model().model);
  const auto pos = bytes.find("\"version\":1");
  REQUIRE(pos != std::string::npos);
  bytes.replace(pos, 11, "\"version\":7");
  try {
    decode_ids(bytes);
    FAIL("expected a checkpoint error");
  } catch (const CheckpointError& e) {
    const std::string what = e.what();
    CHECK(what.find('7') != std::string::npos);
    CHECK(what.find('1') != std::string::npos);
  }
}

TEST_CASE("agent checkpoint is not an ids checkpoint") {
  const std::string bytes = encode_ids(separated_model().model);
  std::string other = bytes;
  const auto pos = other.find("\"logistic\"");
  REQUIRE(pos != std::string::npos);
  other.replace(pos, 10, "\"ppo_agent\"");
  CHECK_THROWS_AS(decode_ids(other), CheckpointError);
}

}

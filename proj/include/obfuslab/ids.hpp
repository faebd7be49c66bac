#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "obfuslab/corpus.hpp"
#include "obfuslab/mlp.hpp"

namespace obfuslab::ids {

// Anything that can score a feature vector with P(non-malicious).
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::size_t dimension() const = 0;
  virtual double predict_non_malicious(const corpus::FeatureVector& v) const = 0;
};

enum class ModelKind { logistic, mlp };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

double sigmoid(double z);

// Surrogate discriminator. A logistic model is an Mlp with no hidden layer;
// the mlp kind has one tanh hidden layer. Output is sigmoid(net(v / scale)).
// Immutable after training, so concurrent prediction is safe.
class IdsModel final : public Predictor {
 public:
  IdsModel() = default;
  IdsModel(ModelKind kind, nn::Mlp network, double input_scale = corpus::kFrequencyScale,
           std::int64_t version = 1);

  static IdsModel logistic(std::vector<double> weights, double bias,
                           double input_scale = corpus::kFrequencyScale);

  ModelKind kind() const { return kind_; }
  double input_scale() const { return input_scale_; }
  std::int64_t version() const { return version_; }
  const nn::Mlp& network() const { return network_; }

  std::size_t dimension() const override { return network_.input_size(); }
  // Throws InputError on a dimension mismatch.
  double predict_non_malicious(const corpus::FeatureVector& v) const override;
  // Input already divided by input_scale.
  double predict_scaled(std::span<const double> x) const;

 private:
  ModelKind kind_ = ModelKind::logistic;
  nn::Mlp network_;
  double input_scale_ = corpus::kFrequencyScale;
  std::int64_t version_ = 1;
};

struct IdsMetrics {
  double accuracy = 0.0;
  double false_positive_rate = 0.0;  // benign held-out entries predicted malicious
  std::size_t n_eval = 0;
};

struct TrainOptions {
  ModelKind kind = ModelKind::logistic;
  double split_fraction = 0.8;  // training share
  std::size_t epochs = 2000;
  double learning_rate = 0.5;
  std::size_t hidden_units = 16;  // mlp kind only
  std::uint64_t seed = 0;
};

struct TrainResult {
  IdsModel model;
  IdsMetrics metrics;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> eval_indices;
};

// Stratified split, then full-batch gradient descent on mean cross-entropy
// (benign = 1). Throws TrainingError when a class is missing.
TrainResult train_ids(const corpus::Corpus& corpus, const TrainOptions& options);

// Threshold 0.5 on the given entries.
IdsMetrics evaluate_ids(const IdsModel& model, const corpus::Corpus& corpus,
                        std::span<const std::size_t> indices);
IdsMetrics evaluate_ids(const IdsModel& model, const corpus::Corpus& corpus);

std::string encode_ids(const IdsModel& model);
IdsModel decode_ids(std::string_view bytes, std::string_view source = "<ids>");
void save_ids(const IdsModel& model, const std::filesystem::path& path);
IdsModel load_ids(const std::filesystem::path& path);

}  // namespace obfuslab::ids

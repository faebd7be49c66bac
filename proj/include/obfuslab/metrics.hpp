#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "obfuslab/corpus.hpp"
#include "obfuslab/record.hpp"

namespace obfuslab::metrics {

// Pearson product-moment correlation, clamped to [-1, 1]. Symmetric in its
// arguments bit-for-bit. Throws InputError on length mismatch or fewer than
// two entries, UndefinedSimilarityError when either input has zero variance.
double pearson_similarity(std::span<const double> a, std::span<const double> b);
double pearson_similarity(std::span<const std::int32_t> a, std::span<const std::int32_t> b);
double pearson_similarity(const corpus::FeatureVector& a, const corpus::FeatureVector& b);

// nullopt instead of throwing on zero variance.
std::optional<double> try_pearson_similarity(const corpus::FeatureVector& a,
                                             const corpus::FeatureVector& b);

inline constexpr std::size_t kHistogramBins = 20;  // width 0.05 over [0, 1]
inline constexpr double kHistogramBinWidth = 0.05;

struct EvasionStats {
  std::size_t n_episodes = 0;
  double mean_initial_p = 0.0;
  double mean_final_p = 0.0;
  double mean_uplift = 0.0;
  double fraction_geq_half = 0.0;
  std::array<std::size_t, kHistogramBins> final_p_histogram{};

  friend bool operator==(const EvasionStats&, const EvasionStats&) = default;
};

std::size_t histogram_bin(double p);

// Single-pass accumulator behind evasion_statistics().
class EvasionAccumulator {
 public:
  void add(double initial_p, double final_p);
  std::size_t count() const { return n_; }
  // Throws InputError when nothing was added.
  EvasionStats stats() const;

 private:
  std::size_t n_ = 0;
  std::size_t geq_half_ = 0;
  double sum_initial_ = 0.0;
  double sum_final_ = 0.0;
  double sum_uplift_ = 0.0;
  std::array<std::size_t, kHistogramBins> hist_{};
};

EvasionStats evasion_statistics(std::span<const ObfuscationRecord> records);

std::string evasion_summary_json(const EvasionStats& stats);
std::string histogram_csv(const EvasionStats& stats);

// One row per PPO update, parsed from the line-delimited metrics stream.
struct CurveRow {
  std::size_t update = 0;
  std::size_t steps = 0;
  double mean_reward = 0.0;
  std::optional<double> mean_episode_reward;
  std::optional<double> mean_discounted_episode_reward;
  std::optional<double> mean_episode_length;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

std::vector<CurveRow> training_curves(std::string_view metrics_stream,
                                      std::string_view source_name = "<metrics>");

// Header row always present; missing optionals become empty cells.
std::string curves_csv(std::span<const CurveRow> rows);

struct SimilaritySummary {
  std::vector<std::optional<double>> values;
  std::optional<double> median;
  std::size_t undefined = 0;
};

SimilaritySummary similarity_summary(std::span<const ObfuscationRecord> records);
std::string similarity_csv(std::span<const ObfuscationRecord> records);

}  // namespace obfuslab::metrics

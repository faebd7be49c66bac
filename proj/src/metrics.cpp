#include "obfuslab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "obfuslab/errors.hpp"
#include "obfuslab/io.hpp"

namespace obfuslab::metrics {

double pearson_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InputError("pearson_similarity: lengths differ (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  if (a.size() < 2) throw InputError("pearson_similarity: need at least two entries");
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0)
    throw UndefinedSimilarityError("pearson_similarity: zero-variance vector");
  const double r = cov / std::sqrt(var_a * var_b);
  return std::clamp(r, -1.0, 1.0);
}

double pearson_similarity(std::span<const std::int32_t> a, std::span<const std::int32_t> b) {
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  return pearson_similarity(std::span<const double>(x), std::span<const double>(y));
}

double pearson_similarity(const corpus::FeatureVector& a, const corpus::FeatureVector& b) {
  return pearson_similarity(a.values(), b.values());
}

std::optional<double> try_pearson_similarity(const corpus::FeatureVector& a,
                                             const corpus::FeatureVector& b) {
  try {
    return pearson_similarity(a, b);
  } catch (const UndefinedSimilarityError&) {
    return std::nullopt;
  }
}

std::size_t histogram_bin(double p) {
  if (!(p >= 0.0)) return 0;
  return std::min(kHistogramBins - 1, static_cast<std::size_t>(p * kHistogramBins));
}

void EvasionAccumulator::add(double initial_p, double final_p) {
  ++n_;
  sum_initial_ += initial_p;
  sum_final_ += final_p;
  sum_uplift_ += final_p - initial_p;
  if (final_p >= 0.5) ++geq_half_;
  ++hist_[histogram_bin(final_p)];
}

EvasionStats EvasionAccumulator::stats() const {
  if (n_ == 0) throw InputError("evasion statistics need at least one record");
  EvasionStats s;
  const double n = static_cast<double>(n_);
  s.n_episodes = n_;
  s.mean_initial_p = sum_initial_ / n;
  s.mean_final_p = sum_final_ / n;
  s.mean_uplift = sum_uplift_ / n;
  s.fraction_geq_half = static_cast<double>(geq_half_) / n;
  s.final_p_histogram = hist_;
  return s;
}

EvasionStats evasion_statistics(std::span<const ObfuscationRecord> records) {
  EvasionAccumulator acc;
  for (const auto& r : records) acc.add(r.initial_p, r.final_p);
  return acc.stats();
}

std::string evasion_summary_json(const EvasionStats& s) {
  nlohmann::ordered_json j;
  j["n_episodes"] = s.n_episodes;
  j["mean_initial_p"] = s.mean_initial_p;
  j["mean_final_p"] = s.mean_final_p;
  j["mean_uplift"] = s.mean_uplift;
  j["fraction_geq_half"] = s.fraction_geq_half;
  j["histogram_bin_width"] = kHistogramBinWidth;
  j["final_p_histogram"] = s.final_p_histogram;
  return j.dump();
}

std::string histogram_csv(const EvasionStats& s) {
  std::string out = "bin_low,bin_high,count\n";
  char line[64];
  for (std::size_t k = 0; k < kHistogramBins; ++k) {
    std::snprintf(line, sizeof line, "%.2f,%.2f,%zu\n", k * kHistogramBinWidth,
                  (k + 1) * kHistogramBinWidth, s.final_p_histogram[k]);
    out += line;
  }
  return out;
}

namespace {

std::optional<double> optional_number(const nlohmann::json& rec, const char* key) {
  if (!rec.contains(key) || rec[key].is_null()) return std::nullopt;
  return rec.at(key).get<double>();
}

void append_cell(std::string& out, std::optional<double> v) {
  out.push_back(',');
  if (!v) return;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", *v);
  out += buf;
}

}  // namespace

std::vector<CurveRow> training_curves(std::string_view metrics_stream,
                                      std::string_view source_name) {
  const std::string src(source_name);
  std::vector<CurveRow> rows;
  const auto lines = io::split_lines(metrics_stream);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(lines[k]);
      if (!rec.is_object()) throw ParseError(src, k + 1, "metrics record is not an object");
      CurveRow row;
      row.update = rec.at("update").get<std::size_t>();
      row.steps = rec.at("steps").get<std::size_t>();
      row.mean_reward = rec.at("mean_reward").get<double>();
      row.mean_episode_reward = optional_number(rec, "mean_episode_reward");
      row.mean_discounted_episode_reward =
          optional_number(rec, "mean_discounted_episode_reward");
      row.mean_episode_length = optional_number(rec, "mean_episode_length");
      row.actor_loss = rec.at("actor_loss").get<double>();
      row.critic_loss = rec.at("critic_loss").get<double>();
      row.entropy = rec.at("entropy").get<double>();
      row.clip_fraction = rec.at("clip_fraction").get<double>();
      rows.push_back(row);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(src, k + 1, std::string("malformed metrics record: ") + e.what());
    }
  }
  return rows;
}

std::string curves_csv(std::span<const CurveRow> rows) {
  std::string out =
      "update,steps,mean_reward,mean_episode_reward,mean_discounted_episode_reward,"
      "mean_episode_length,actor_loss,critic_loss,entropy,clip_fraction\n";
  for (const auto& r : rows) {
    out += std::to_string(r.update);
    out.push_back(',');
    out += std::to_string(r.steps);
    append_cell(out, r.mean_reward);
    append_cell(out, r.mean_episode_reward);
    append_cell(out, r.mean_discounted_episode_reward);
    append_cell(out, r.mean_episode_length);
    append_cell(out, r.actor_loss);
    append_cell(out, r.critic_loss);
    append_cell(out, r.entropy);
    append_cell(out, r.clip_fraction);
    out.push_back('\n');
  }
  return out;
}

SimilaritySummary similarity_summary(std::span<const ObfuscationRecord> records) {
  SimilaritySummary s;
  std::vector<double> defined;
  for (const auto& r : records) {
    s.values.push_back(r.similarity);
    if (r.similarity) defined.push_back(*r.similarity);
    else ++s.undefined;
  }
  if (!defined.empty()) {
    std::sort(defined.begin(), defined.end());
    const std::size_t m = defined.size() / 2;
    s.median = defined.size() % 2 ? defined[m] : 0.5 * (defined[m - 1] + defined[m]);
  }
  return s;
}

std::string similarity_csv(std::span<const ObfuscationRecord> records) {
  std::string out = "agent_id,source_entry_id,steps,initial_p,final_p,similarity\n";
  char buf[128];
  for (const auto& r : records) {
    out += r.agent_id + "," + r.source_entry_id;
    std::snprintf(buf, sizeof buf, ",%zu,%.17g,%.17g,", r.steps, r.initial_p, r.final_p);
    out += buf;
    if (r.similarity) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.similarity);
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace obfuslab::metrics

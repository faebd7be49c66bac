#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "obfuslab/corpus.hpp"
#include "obfuslab/ids.hpp"

namespace testing {

class ConstantPredictor : public obfuslab::ids::Predictor {
 public:
  ConstantPredictor(std::size_t dim, double p) : dim_(dim), p_(p) {}
  std::size_t dimension() const override { return dim_; }
  double predict_non_malicious(const obfuslab::corpus::FeatureVector&) const override {
    return p_;
  }

 private:
  std::size_t dim_;
  double p_;
};

// Returns script[k] on the k-th call, then repeats the last value.
class ScriptedPredictor : public obfuslab::ids::Predictor {
 public:
  ScriptedPredictor(std::size_t dim, std::vector<double> script)
      : dim_(dim), script_(std::move(script)) {}
  std::size_t dimension() const override { return dim_; }
  double predict_non_malicious(const obfuslab::corpus::FeatureVector&) const override {
    const double p = script_[std::min(calls_, script_.size() - 1)];
    ++calls_;
    return p;
  }
  std::size_t calls() const { return calls_; }

 private:
  std::size_t dim_;
  std::vector<double> script_;
  mutable std::size_t calls_ = 0;
};

inline obfuslab::corpus::Corpus corpus_of(
    const std::vector<std::vector<std::int32_t>>& malicious,
    const std::vector<std::vector<std::int32_t>>& benign = {}) {
  using namespace obfuslab::corpus;
  const std::size_t dim = malicious.empty() ? benign.front().size() : malicious.front().size();
  std::vector<CorpusEntry> entries;
  for (std::size_t i = 0; i < malicious.size(); ++i)
    entries.push_back({"m" + std::to_string(i), Label::malicious, FeatureVector(malicious[i])});
  for (std::size_t i = 0; i < benign.size(); ++i)
    entries.push_back({"b" + std::to_string(i), Label::benign, FeatureVector(benign[i])});
  return Corpus(synthetic_vocabulary(dim), std::move(entries));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("obfuslab-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing

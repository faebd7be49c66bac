#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace obfuslab::corpus {

inline constexpr std::int32_t kMaxFrequency = 10000;
inline constexpr double kFrequencyScale = 10000.0;
inline constexpr std::size_t kDefaultVocabularySize = 64;
inline constexpr int kCorpusFormatVersion = 1;

// Ordered set of unique opcode mnemonics. Index <-> mnemonic is a bijection
// and the order never changes after construction.
class OpcodeVocabulary {
 public:
  OpcodeVocabulary() = default;

  // Drops repeats, keeping the first occurrence. Throws ConfigError when
  // fewer than two distinct mnemonics remain.
  static OpcodeVocabulary build(std::span<const std::string> mnemonics);

  std::size_t size() const noexcept { return mnemonics_.size(); }
  const std::string& mnemonic(std::size_t index) const { return mnemonics_.at(index); }
  const std::vector<std::string>& mnemonics() const noexcept { return mnemonics_; }
  std::optional<std::size_t> index_of(std::string_view mnemonic) const;

  friend bool operator==(const OpcodeVocabulary& a, const OpcodeVocabulary& b) {
    return a.mnemonics_ == b.mnemonics_;
  }

 private:
  std::vector<std::string> mnemonics_;
  std::unordered_map<std::string, std::size_t> index_;
};

OpcodeVocabulary build_vocabulary(std::span<const std::string> mnemonics);

// Vocabulary of `size` names: common x86 mnemonics first, then "op_NNNN".
OpcodeVocabulary synthetic_vocabulary(std::size_t size = kDefaultVocabularySize);

// Opcode frequency counts, one slot per vocabulary entry, each in
// [0, kMaxFrequency]. Only counts are representable; there is no ordering
// information about the instructions they came from.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<std::int32_t> frequencies);

  static FeatureVector zeros(std::size_t size);

  std::size_t size() const noexcept { return freqs_.size(); }
  std::int32_t operator[](std::size_t i) const { return freqs_[i]; }
  std::span<const std::int32_t> values() const noexcept { return freqs_; }
  void set(std::size_t i, std::int32_t value);

  // Frequencies divided by kFrequencyScale.
  std::vector<double> normalized() const;
  void normalized_into(std::span<double> out) const;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<std::int32_t> freqs_;
};

enum class Label { malicious, benign };
enum class Source { synthetic, imported };

std::string_view to_string(Label label);
std::string_view to_string(Source source);

struct CorpusEntry {
  std::string id;
  Label label = Label::malicious;
  FeatureVector vector;
  Source source = Source::synthetic;

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

// Immutable once built; safe to share read-only across threads.
class Corpus {
 public:
  Corpus() = default;
  // Throws InputError on duplicate ids or a vector whose length differs from
  // the vocabulary.
  Corpus(OpcodeVocabulary vocabulary, std::vector<CorpusEntry> entries);

  const OpcodeVocabulary& vocabulary() const noexcept { return vocabulary_; }
  const std::vector<CorpusEntry>& entries() const noexcept { return entries_; }
  std::size_t dimension() const noexcept { return vocabulary_.size(); }
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t count(Label label) const;
  std::vector<std::size_t> indices_of(Label label) const;

  friend bool operator==(const Corpus& a, const Corpus& b) {
    return a.vocabulary_ == b.vocabulary_ && a.entries_ == b.entries_;
  }

 private:
  OpcodeVocabulary vocabulary_;
  std::vector<CorpusEntry> entries_;
};

// Two-class synthetic corpus. The malicious profile lives on the first half
// of the vocabulary and a second profile on the disjoint other half; the
// benign profile is (1 - separation) * malicious + separation * disjoint.
// Each file draws a total opcode count uniformly in [200, 2000] and then a
// multinomial sample from its class profile. Entries are malicious first,
// then benign. Pure function of the arguments.
Corpus synthesize_corpus(const OpcodeVocabulary& vocabulary, std::size_t n_malicious,
                         std::size_t n_benign, double separation, std::uint64_t seed);

std::string format_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view text, std::string_view source_name = "<corpus>");

void write_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus read_corpus(const std::filesystem::path& path);

}  // namespace obfuslab::corpus

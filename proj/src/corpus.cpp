#include "obfuslab/corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <set>

#include <json.hpp>

#include "obfuslab/errors.hpp"
#include "obfuslab/io.hpp"

namespace obfuslab::corpus {

OpcodeVocabulary OpcodeVocabulary::build(std::span<const std::string> mnemonics) {
  if (mnemonics.empty()) throw ConfigError("opcode vocabulary: empty mnemonic list");
  OpcodeVocabulary vocab;
  for (const auto& m : mnemonics) {
    if (m.empty()) throw ConfigError("opcode vocabulary: empty mnemonic");
    if (vocab.index_.emplace(m, vocab.mnemonics_.size()).second) vocab.mnemonics_.push_back(m);
  }
  if (vocab.mnemonics_.size() < 2)
    throw ConfigError("opcode vocabulary: need at least 2 distinct mnemonics");
  return vocab;
}

std::optional<std::size_t> OpcodeVocabulary::index_of(std::string_view mnemonic) const {
  auto it = index_.find(std::string(mnemonic));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

OpcodeVocabulary build_vocabulary(std::span<const std::string> mnemonics) {
  return OpcodeVocabulary::build(mnemonics);
}

OpcodeVocabulary synthetic_vocabulary(std::size_t size) {
  static constexpr std::array<const char*, 40> kCommon = {
      "mov",  "push", "pop",  "call", "ret",  "jmp",  "jz",   "jnz",  "cmp",  "test",
      "add",  "sub",  "xor",  "and",  "or",   "lea",  "inc",  "dec",  "shl",  "shr",
      "imul", "idiv", "nop",  "int",  "movzx", "movsx", "sar", "rol", "ror",  "not",
      "neg",  "xchg", "leave", "enter", "cdq", "sete", "setne", "cmovz", "rep", "stos"};
  std::vector<std::string> names;
  names.reserve(size);
  for (std::size_t k = 0; k < size; ++k) {
    if (k < kCommon.size()) {
      names.emplace_back(kCommon[k]);
    } else {
      char buf[32];
      std::snprintf(buf, sizeof buf, "op_%04zu", k);
      names.emplace_back(buf);
    }
  }
  return OpcodeVocabulary::build(names);
}

namespace {

void check_frequency(std::int32_t v) {
  if (v < 0 || v > kMaxFrequency)
    throw InputError("opcode frequency " + std::to_string(v) + " outside [0, " +
                     std::to_string(kMaxFrequency) + "]");
}

}  // namespace

FeatureVector::FeatureVector(std::vector<std::int32_t> frequencies)
    : freqs_(std::move(frequencies)) {
  for (auto v : freqs_) check_frequency(v);
}

FeatureVector FeatureVector::zeros(std::size_t size) {
  return FeatureVector(std::vector<std::int32_t>(size, 0));
}

void FeatureVector::set(std::size_t i, std::int32_t value) {
  check_frequency(value);
  freqs_.at(i) = value;
}

std::vector<double> FeatureVector::normalized() const {
  std::vector<double> out(freqs_.size());
  normalized_into(out);
  return out;
}

void FeatureVector::normalized_into(std::span<double> out) const {
  for (std::size_t i = 0; i < freqs_.size(); ++i) out[i] = freqs_[i] / kFrequencyScale;
}

std::string_view to_string(Label label) {
  return label == Label::malicious ? "malicious" : "benign";
}

std::string_view to_string(Source source) {
  return source == Source::synthetic ? "synthetic" : "imported";
}

Corpus::Corpus(OpcodeVocabulary vocabulary, std::vector<CorpusEntry> entries)
    : vocabulary_(std::move(vocabulary)), entries_(std::move(entries)) {
  std::set<std::string_view> ids;
  for (const auto& e : entries_) {
    if (e.id.empty()) throw InputError("corpus entry with empty id");
    if (!ids.insert(e.id).second) throw InputError("duplicate corpus id: " + e.id);
    if (e.vector.size() != vocabulary_.size())
      throw InputError("corpus entry " + e.id + " has " + std::to_string(e.vector.size()) +
                       " frequencies, vocabulary has " + std::to_string(vocabulary_.size()));
  }
}

std::size_t Corpus::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      entries_.begin(), entries_.end(), [&](const auto& e) { return e.label == label; }));
}

std::vector<std::size_t> Corpus::indices_of(Label label) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < entries_.size(); ++k)
    if (entries_[k].label == label) out.push_back(k);
  return out;
}

namespace {

// Gamma(0.7) weights give a few dominant opcodes per profile.
std::vector<double> random_profile(std::size_t n, std::size_t begin, std::size_t end,
                                   std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(0.7, 1.0);
  std::vector<double> p(n, 0.0);
  double total = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    p[k] = gamma(rng) + 1e-3;
    total += p[k];
  }
  for (auto& v : p) v /= total;
  return p;
}

FeatureVector draw_file(const std::vector<double>& profile, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> total_dist(200, 2000);
  std::discrete_distribution<std::size_t> opcode(profile.begin(), profile.end());
  const int total = total_dist(rng);
  std::vector<std::int32_t> counts(profile.size(), 0);
  for (int k = 0; k < total; ++k) {
    auto& c = counts[opcode(rng)];
    c = std::min(c + 1, kMaxFrequency);
  }
  return FeatureVector(std::move(counts));
}

}  // namespace

Corpus synthesize_corpus(const OpcodeVocabulary& vocabulary, std::size_t n_malicious,
                         std::size_t n_benign, double separation, std::uint64_t seed) {
  if (vocabulary.size() < 2) throw ConfigError("synthesize_corpus: vocabulary too small");
  if (!(separation >= 0.0 && separation <= 1.0))
    throw ConfigError("synthesize_corpus: separation must lie in [0, 1]");
  const std::size_t n = vocabulary.size();
  const std::size_t half = (n + 1) / 2;

  std::mt19937_64 rng(seed);
  const auto malicious = random_profile(n, 0, half, rng);
  const auto disjoint = random_profile(n, half, n, rng);
  std::vector<double> benign(n);
  for (std::size_t k = 0; k < n; ++k)
    benign[k] = (1.0 - separation) * malicious[k] + separation * disjoint[k];

  std::vector<CorpusEntry> entries;
  entries.reserve(n_malicious + n_benign);
  char id[32];
  for (std::size_t k = 0; k < n_malicious; ++k) {
    std::snprintf(id, sizeof id, "mal-%05zu", k);
    entries.push_back({id, Label::malicious, draw_file(malicious, rng), Source::synthetic});
  }
  for (std::size_t k = 0; k < n_benign; ++k) {
    std::snprintf(id, sizeof id, "ben-%05zu", k);
    entries.push_back({id, Label::benign, draw_file(benign, rng), Source::synthetic});
  }
  return Corpus(vocabulary, std::move(entries));
}

std::string format_corpus(const Corpus& corpus) {
  std::string out;
  nlohmann::ordered_json header;
  header["version"] = kCorpusFormatVersion;
  header["vocabulary"] = corpus.vocabulary().mnemonics();
  out += header.dump();
  out.push_back('\n');
  for (const auto& e : corpus.entries()) {
    nlohmann::ordered_json rec;
    rec["id"] = e.id;
    rec["label"] = to_string(e.label);
    rec["source"] = to_string(e.source);
    rec["frequencies"] = std::vector<std::int32_t>(e.vector.values().begin(), e.vector.values().end());
    out += rec.dump();
    out.push_back('\n');
  }
  return out;
}

namespace {

const std::set<std::string> kEntryKeys = {"id", "label", "source", "frequencies"};

CorpusEntry parse_entry(const nlohmann::json& rec, std::size_t dim, const std::string& src,
                        std::size_t line) {
  auto fail = [&](const std::string& what) -> ParseError { return {src, line, what}; };
  if (!rec.is_object()) throw fail("record is not an object");
  for (const auto& [key, value] : rec.items())
    if (!kEntryKeys.contains(key)) throw fail("unexpected field \"" + key + "\"");
  for (const auto& key : kEntryKeys)
    if (!rec.contains(key)) throw fail("missing field \"" + key + "\"");

  CorpusEntry entry;
  if (!rec["id"].is_string()) throw fail("id must be a string");
  entry.id = rec["id"].get<std::string>();

  const auto& label = rec["label"];
  if (label == "malicious") entry.label = Label::malicious;
  else if (label == "benign") entry.label = Label::benign;
  else throw fail("label must be \"malicious\" or \"benign\"");

  const auto& source = rec["source"];
  if (source == "synthetic") entry.source = Source::synthetic;
  else if (source == "imported") entry.source = Source::imported;
  else throw fail("source must be \"synthetic\" or \"imported\"");

  const auto& freqs = rec["frequencies"];
  if (!freqs.is_array()) throw fail("frequencies must be an array of integers");
  if (freqs.size() != dim)
    throw fail("frequencies has length " + std::to_string(freqs.size()) +
               ", vocabulary has " + std::to_string(dim));
  std::vector<std::int32_t> values;
  values.reserve(dim);
  for (const auto& f : freqs) {
    if (!f.is_number_integer()) throw fail("frequencies must be whole numbers");
    const auto v = f.get<std::int64_t>();
    if (v < 0 || v > kMaxFrequency)
      throw fail("frequency " + std::to_string(v) + " outside [0, 10000]");
    values.push_back(static_cast<std::int32_t>(v));
  }
  entry.vector = FeatureVector(std::move(values));
  return entry;
}

}  // namespace

Corpus parse_corpus(std::string_view text, std::string_view source_name) {
  const std::string src(source_name);
  const auto lines = io::split_lines(text);
  if (lines.empty()) throw ParseError(src, 1, "missing header line");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(lines[0]);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(src, 1, std::string("malformed header: ") + e.what());
  }
  if (!header.is_object() || !header.contains("version") || !header.contains("vocabulary"))
    throw ParseError(src, 1, "header needs \"version\" and \"vocabulary\"");
  if (header["version"] != kCorpusFormatVersion)
    throw ParseError(src, 1, "unsupported corpus version " + header["version"].dump());
  for (const auto& [key, value] : header.items())
    if (key != "version" && key != "vocabulary")
      throw ParseError(src, 1, "unexpected header field \"" + key + "\"");
  std::vector<std::string> mnemonics;
  try {
    mnemonics = header["vocabulary"].get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError(src, 1, "vocabulary must be an array of strings");
  }
  OpcodeVocabulary vocab;
  try {
    vocab = OpcodeVocabulary::build(mnemonics);
  } catch (const ConfigError& e) {
    throw ParseError(src, 1, e.what());
  }
  if (vocab.size() != mnemonics.size())
    throw ParseError(src, 1, "vocabulary contains duplicate mnemonics");

  std::vector<CorpusEntry> entries;
  std::set<std::string> ids;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const std::size_t line = k + 1;
    if (lines[k].empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(lines[k]);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(src, line, std::string("malformed record: ") + e.what());
    }
    auto entry = parse_entry(rec, vocab.size(), src, line);
    if (!ids.insert(entry.id).second) throw ParseError(src, line, "duplicate id " + entry.id);
    entries.push_back(std::move(entry));
  }
  return Corpus(std::move(vocab), std::move(entries));
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  io::write_file_atomic(path, format_corpus(corpus));
}

Corpus read_corpus(const std::filesystem::path& path) {
  return parse_corpus(io::read_file(path), path.string());
}

}  // namespace obfuslab::corpus

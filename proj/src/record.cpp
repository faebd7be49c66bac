#include "obfuslab/record.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "obfuslab/errors.hpp"
#include "obfuslab/io.hpp"

namespace obfuslab {

namespace {

constexpr std::array<std::string_view, 9> kFields = {
    "agent_id", "seed",  "source_entry_id", "initial_p",          "final_p",
    "steps",    "similarity", "initial_frequencies", "final_frequencies"};

constexpr std::array<std::string_view, 6> kSequenceMarkers = {
    "seq", "instruction", "asm", "disasm", "listing", "bytes"};

bool looks_like_sequence(const std::string& key, const nlohmann::json& value) {
  std::string lower(key);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto marker : kSequenceMarkers)
    if (lower.find(marker) != std::string::npos) return true;
  if (value.is_array())
    for (const auto& item : value)
      if (item.is_string()) return true;
  return value.is_string() && value.get<std::string>().find(' ') != std::string::npos;
}

std::vector<std::int32_t> frequencies(const nlohmann::json& value, std::string_view name) {
  if (!value.is_array()) throw InputError(std::string(name) + " must be an array of integers");
  std::vector<std::int32_t> out;
  out.reserve(value.size());
  for (const auto& f : value) {
    if (!f.is_number_integer()) throw InputError(std::string(name) + " must hold whole numbers");
    const auto v = f.get<std::int64_t>();
    if (v < 0 || v > corpus::kMaxFrequency)
      throw InputError(std::string(name) + " value " + std::to_string(v) +
                       " outside [0, 10000]");
    out.push_back(static_cast<std::int32_t>(v));
  }
  return out;
}

double probability(const nlohmann::json& value, std::string_view name) {
  if (!value.is_number()) throw InputError(std::string(name) + " must be a number");
  const double p = value.get<double>();
  if (!(p >= 0.0 && p <= 1.0)) throw InputError(std::string(name) + " outside [0, 1]");
  return p;
}

}  // namespace

nlohmann::ordered_json to_json(const ObfuscationRecord& r) {
  nlohmann::ordered_json j;
  j["agent_id"] = r.agent_id;
  j["seed"] = r.seed;
  j["source_entry_id"] = r.source_entry_id;
  j["initial_p"] = r.initial_p;
  j["final_p"] = r.final_p;
  j["steps"] = r.steps;
  j["similarity"] = r.similarity ? nlohmann::ordered_json(*r.similarity) : nlohmann::ordered_json();
  const auto init = r.initial_frequencies.values();
  const auto fin = r.final_frequencies.values();
  j["initial_frequencies"] = std::vector<std::int32_t>(init.begin(), init.end());
  j["final_frequencies"] = std::vector<std::int32_t>(fin.begin(), fin.end());
  return j;
}

void validate_record_json(const nlohmann::json& value) {
  if (!value.is_object()) throw InputError("archive record is not an object");
  for (const auto& [key, item] : value.items()) {
    if (std::find(kFields.begin(), kFields.end(), key) != kFields.end()) continue;
    if (looks_like_sequence(key, item))
      throw InputError("archive record field \"" + key +
                       "\" is sequence-typed; only opcode frequencies may be stored");
    throw InputError("archive record has unexpected field \"" + key + "\"");
  }
  for (auto field : kFields)
    if (!value.contains(field))
      throw InputError("archive record missing field \"" + std::string(field) + "\"");

  if (!value["agent_id"].is_string() || !value["source_entry_id"].is_string())
    throw InputError("agent_id and source_entry_id must be strings");
  if (!value["seed"].is_number_unsigned() && !value["seed"].is_number_integer())
    throw InputError("seed must be an integer");
  if (!value["steps"].is_number_integer() || value["steps"].get<std::int64_t>() < 0)
    throw InputError("steps must be a non-negative integer");
  probability(value["initial_p"], "initial_p");
  probability(value["final_p"], "final_p");
  const auto& sim = value["similarity"];
  if (!sim.is_null()) {
    if (!sim.is_number()) throw InputError("similarity must be a number or null");
    const double s = sim.get<double>();
    if (!(s >= -1.0 && s <= 1.0)) throw InputError("similarity outside [-1, 1]");
  }
  const auto init = frequencies(value["initial_frequencies"], "initial_frequencies");
  const auto fin = frequencies(value["final_frequencies"], "final_frequencies");
  if (init.size() != fin.size())
    throw InputError("initial_frequencies and final_frequencies differ in length");
  for (std::size_t i = 0; i < init.size(); ++i)
    if (fin[i] < init[i])
      throw InputError("final_frequencies[" + std::to_string(i) +
                       "] is below the original frequency");
}

ObfuscationRecord record_from_json(const nlohmann::json& value) {
  validate_record_json(value);
  ObfuscationRecord r;
  r.agent_id = value["agent_id"].get<std::string>();
  r.seed = value["seed"].get<std::uint64_t>();
  r.source_entry_id = value["source_entry_id"].get<std::string>();
  r.initial_p = value["initial_p"].get<double>();
  r.final_p = value["final_p"].get<double>();
  r.steps = value["steps"].get<std::size_t>();
  if (!value["similarity"].is_null()) r.similarity = value["similarity"].get<double>();
  r.initial_frequencies =
      corpus::FeatureVector(frequencies(value["initial_frequencies"], "initial_frequencies"));
  r.final_frequencies =
      corpus::FeatureVector(frequencies(value["final_frequencies"], "final_frequencies"));
  return r;
}

std::string format_records(std::span<const ObfuscationRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out.push_back('\n');
  }
  return out;
}

std::vector<ObfuscationRecord> parse_records(std::string_view text,
                                             std::string_view source_name) {
  const std::string src(source_name);
  std::vector<ObfuscationRecord> out;
  const auto lines = io::split_lines(text);
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (lines[k].empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(lines[k])));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(src, k + 1, std::string("malformed record: ") + e.what());
    } catch (const InputError& e) {
      throw ParseError(src, k + 1, e.what());
    }
  }
  return out;
}

void write_records(std::span<const ObfuscationRecord> records,
                   const std::filesystem::path& path) {
  io::write_file_atomic(path, format_records(records));
}

std::vector<ObfuscationRecord> read_records(const std::filesystem::path& path) {
  return parse_records(io::read_file(path), path.string());
}

}  // namespace obfuslab

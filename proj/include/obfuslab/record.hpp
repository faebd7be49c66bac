#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "obfuslab/corpus.hpp"

namespace obfuslab {

// One finished obfuscation episode. Only frequency vectors are stored.
struct ObfuscationRecord {
  std::string agent_id;
  std::uint64_t seed = 0;
  std::string source_entry_id;
  corpus::FeatureVector initial_frequencies;
  corpus::FeatureVector final_frequencies;
  double initial_p = 0.0;
  double final_p = 0.0;
  std::size_t steps = 0;
  // Empty when either vector has zero variance.
  std::optional<double> similarity;

  friend bool operator==(const ObfuscationRecord&, const ObfuscationRecord&) = default;
};

nlohmann::ordered_json to_json(const ObfuscationRecord& record);

// Strict schema check: exactly the record fields, frequencies as equal-length
// integer arrays in [0, 10000] with final >= initial elementwise. Any other
// field is rejected; fields that look like opcode sequences (arrays of
// strings, names mentioning sequences/instructions/assembly) are rejected
// with a dedicated message. Throws InputError.
void validate_record_json(const nlohmann::json& value);

ObfuscationRecord record_from_json(const nlohmann::json& value);

std::string format_records(std::span<const ObfuscationRecord> records);
std::vector<ObfuscationRecord> parse_records(std::string_view text,
                                             std::string_view source_name = "<archive>");

void write_records(std::span<const ObfuscationRecord> records,
                   const std::filesystem::path& path);
std::vector<ObfuscationRecord> read_records(const std::filesystem::path& path);

}  // namespace obfuslab

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace obfuslab::io {

// Writes to a sibling temp file then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// Splits on '\n'; a trailing newline does not produce an empty last line.
std::vector<std::string> split_lines(std::string_view text);

// Versioned binary checkpoint: one JSON header line followed by parameter
// arrays as little-endian IEEE-754 doubles, in the order of header["shapes"].
struct Checkpoint {
  nlohmann::json header;
  std::vector<std::vector<double>> arrays;
};

inline constexpr int kCheckpointVersion = 1;

std::string encode_checkpoint(nlohmann::json header,
                              const std::vector<std::vector<std::size_t>>& shapes,
                              const std::vector<std::span<const double>>& arrays);

// Validates version and kind, and that the payload matches the declared
// shapes exactly.
Checkpoint decode_checkpoint(std::string_view bytes, std::string_view expected_kind,
                             std::string_view source);

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      const std::vector<std::vector<std::size_t>>& shapes,
                      const std::vector<std::span<const double>>& arrays);

Checkpoint read_checkpoint(const std::filesystem::path& path,
                           std::string_view expected_kind);

}  // namespace obfuslab::io

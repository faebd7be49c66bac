#include "obfuslab/io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "obfuslab/errors.hpp"

namespace obfuslab::io {

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " +
                ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

namespace {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void append_le(std::string& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int k = 0; k < 8; ++k) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int k = 7; k >= 0; --k) {
    bits = (bits << 8) | static_cast<unsigned char>(p[k]);
  }
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string encode_checkpoint(nlohmann::json header,
                              const std::vector<std::vector<std::size_t>>& shapes,
                              const std::vector<std::span<const double>>& arrays) {
  if (shapes.size() != arrays.size())
    throw CheckpointError("checkpoint: shape list and array list differ in length");
  header["version"] = kCheckpointVersion;
  header["shapes"] = shapes;
  std::string out = header.dump();
  out.push_back('\n');
  for (std::size_t k = 0; k < arrays.size(); ++k) {
    if (arrays[k].size() != element_count(shapes[k]))
      throw CheckpointError("checkpoint: array " + std::to_string(k) +
                            " does not match its declared shape");
    for (double v : arrays[k]) append_le(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes, std::string_view expected_kind,
                             std::string_view source) {
  const std::string where(source);
  const auto newline = bytes.find('\n');
  if (newline == std::string_view::npos)
    throw CheckpointError(where + ": missing checkpoint header");
  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(where + ": unreadable checkpoint header: " + e.what());
  }
  const auto& h = ckpt.header;
  if (!h.is_object() || !h.contains("version") || !h["version"].is_number_integer())
    throw CheckpointError(where + ": checkpoint header has no version");
  const int version = h["version"].get<int>();
  if (version != kCheckpointVersion)
    throw CheckpointError(where + ": checkpoint version " + std::to_string(version) +
                          " is not supported (expected version " +
                          std::to_string(kCheckpointVersion) + ")");
  if (!h.contains("kind") || !h["kind"].is_string() ||
      h["kind"].get<std::string>() != expected_kind)
    throw CheckpointError(where + ": checkpoint kind mismatch (expected " +
                          std::string(expected_kind) + ")");
  std::vector<std::vector<std::size_t>> shapes;
  try {
    shapes = h.at("shapes").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError(where + ": checkpoint shapes malformed");
  }
  std::size_t offset = newline + 1;
  for (const auto& shape : shapes) {
    const std::size_t n = element_count(shape);
    if (bytes.size() - offset < n * 8)
      throw CheckpointError(where + ": checkpoint truncated");
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) values[k] = read_le(bytes.data() + offset + 8 * k);
    offset += n * 8;
    ckpt.arrays.push_back(std::move(values));
  }
  if (offset != bytes.size())
    throw CheckpointError(where + ": checkpoint has trailing bytes");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, nlohmann::json header,
                      const std::vector<std::vector<std::size_t>>& shapes,
                      const std::vector<std::span<const double>>& arrays) {
  write_file_atomic(path, encode_checkpoint(std::move(header), shapes, arrays));
}

Checkpoint read_checkpoint(const std::filesystem::path& path,
                           std::string_view expected_kind) {
  std::string bytes;
  try {
    bytes = read_file(path);
  } catch (const InputError& e) {
    throw CheckpointError(e.what());
  }
  return decode_checkpoint(bytes, expected_kind, path.string());
}

}  // namespace obfuslab::io

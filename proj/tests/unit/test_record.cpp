#include <doctest.h>

#include <string>
#include <vector>

#include "obfuslab/errors.hpp"
#include "obfuslab/record.hpp"
#include "support.hpp"

using namespace obfuslab;
using nlohmann::json;

namespace {

ObfuscationRecord sample() {
  ObfuscationRecord r;
  r.agent_id = "agent-0";
  r.seed = 3;
  r.source_entry_id = "mal-00001";
  r.initial_frequencies = corpus::FeatureVector({4, 0, 9});
  r.final_frequencies = corpus::FeatureVector({4, 15, 9});
  r.initial_p = 0.01;
  r.final_p = 0.93;
  r.steps = 3;
  r.similarity = 0.25;
  return r;
}

json sample_json() { return json::parse(to_json(sample()).dump()); }

std::string rejection(const json& j) {
  try {
    validate_record_json(j);
  } catch (const InputError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_SUITE("record") {

TEST_CASE("record json round trip") {
  CHECK(record_from_json(sample_json()) == sample());
  auto r = sample();
  r.similarity.reset();
  CHECK(record_from_json(json::parse(to_json(r).dump())) == r);
}

TEST_CASE("record file round trip") {
  const std::vector<ObfuscationRecord> rs{sample(), sample()};
  CHECK(parse_records(format_records(rs)) == rs);
  testing::TempDir dir;
  write_records(rs, dir / "a.jsonl");
  CHECK(read_records(dir / "a.jsonl") == rs);
}

TEST_CASE("sequence-typed fields are rejected") {
  for (const char* key : {"opcode_sequence", "instructions", "asm", "disassembly", "listing"}) {
    auto j = sample_json();
    j[key] = "mov eax, 1";
    CHECK(rejection(j).find("sequence") != std::string::npos);
  }
  auto j = sample_json();
  j["trace"] = json::array({"mov", "add", "jmp"});
  CHECK(rejection(j).find("sequence") != std::string::npos);
  j = sample_json();
  j["note"] = "push ebp";
  CHECK(rejection(j).find("sequence") != std::string::npos);
}

TEST_CASE("frequency arrays must hold integers") {
  auto j = sample_json();
  j["final_frequencies"] = json::array({"mov", "add", "nop"});
  CHECK_FALSE(rejection(j).empty());
  j = sample_json();
  j["final_frequencies"] = json::array({4, 15.5, 9});
  CHECK_FALSE(rejection(j).empty());
}

TEST_CASE("unknown and missing fields are rejected") {
  auto j = sample_json();
  j["extra"] = 1;
  CHECK_FALSE(rejection(j).empty());
  j = sample_json();
  j.erase("steps");
  CHECK_FALSE(rejection(j).empty());
}

TEST_CASE("range and consistency checks") {
  auto j = sample_json();
  j["final_p"] = 1.5;
  CHECK_FALSE(rejection(j).empty());
  j = sample_json();
  j["similarity"] = -2.0;
  CHECK_FALSE(rejection(j).empty());
  j = sample_json();
  j["final_frequencies"] = json::array({3, 15, 9});
  CHECK_FALSE(rejection(j).empty());
  j = sample_json();
  j["final_frequencies"] = json::array({4, 15});
  CHECK_FALSE(rejection(j).empty());
  j = sample_json();
  j["initial_frequencies"] = json::array({4, 0, 10001});
  CHECK_FALSE(rejection(j).empty());
}

TEST_CASE("bad archive line reports its number") {
  const std::string text = format_records(std::vector{sample()}) + "{\"agent_id\":1}\n";
  try {
    parse_records(text, "a.jsonl");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

}

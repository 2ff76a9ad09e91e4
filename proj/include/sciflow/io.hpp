#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace sciflow {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

// First line of every file the pipeline writes.
struct OutputHeader {
  std::string tool_version = kToolVersion;
  std::string config_hash;
  std::uint64_t seed = 0;

  json to_json() const;
  static OutputHeader from_json(const json& j);
};

std::string hex64(std::uint64_t v);

// Stable hash of a JSON value's compact dump.
std::string config_hash(const json& config);

// Calls `row` for every non-blank line parsed as a JSON object. Parse errors
// carry the file name and 1-based line number.
void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t line)>& row);

// Two-column CSV with a header line; returns (first, second) per data row.
std::vector<std::pair<std::string, std::string>> read_csv_pairs(
    const std::filesystem::path& path, const std::string& first_name,
    const std::string& second_name);

json read_json_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Header line followed by one compact JSON value per line.
void write_jsonl(const std::filesystem::path& path, const OutputHeader& header,
                 const std::vector<json>& rows);

struct JsonlFile {
  OutputHeader header;
  std::vector<json> rows;
};

// Reads a file produced by write_jsonl.
JsonlFile read_output_jsonl(const std::filesystem::path& path);

// Field accessors that raise ValidationError naming the missing key.
const json& require_key(const json& obj, const char* key);
std::string require_string(const json& obj, const char* key);
int require_int(const json& obj, const char* key);
std::optional<std::string> optional_string(const json& obj, const char* key);
std::optional<int> optional_int(const json& obj, const char* key);
std::vector<std::string> string_list(const json& obj, const char* key);

template <class T>
json optional_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace sciflow

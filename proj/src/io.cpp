#include "sciflow/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "sciflow/error.hpp"
#include "sciflow/rng.hpp"

namespace sciflow {

json OutputHeader::to_json() const {
  return json{{"tool_version", tool_version}, {"config_hash", config_hash}, {"seed", seed}};
}

OutputHeader OutputHeader::from_json(const json& j) {
  OutputHeader h;
  h.tool_version = j.at("tool_version").get<std::string>();
  h.config_hash = j.at("config_hash").get<std::string>();
  h.seed = j.at("seed").get<std::uint64_t>();
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t") == std::string::npos; }

}  // namespace

void for_each_jsonl(const std::filesystem::path& path,
                    const std::function<void(const json&, std::size_t)>& row) {
  auto in = open_input(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(std::move(line));
    if (blank(line)) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": malformed row: " + e.what());
    }
    if (!obj.is_object())
      throw ValidationError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": malformed row: expected a JSON object");
    try {
      row(obj, lineno);
    } catch (const ValidationError& e) {
      throw ValidationError(path.filename().string() + ":" + std::to_string(lineno) + ": " +
                            e.what());
    } catch (const json::exception& e) {
      throw ValidationError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": malformed row: " + e.what());
    }
  }
}

std::vector<std::pair<std::string, std::string>> read_csv_pairs(const std::filesystem::path& path,
                                                                const std::string& first_name,
                                                                const std::string& second_name) {
  auto in = open_input(path);
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim_cr(std::move(line));
    if (blank(line)) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw ValidationError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": malformed row: expected two comma-separated columns");
    std::string a = line.substr(0, comma);
    std::string b = line.substr(comma + 1);
    if (!header_seen) {
      header_seen = true;
      if (a != first_name || b != second_name)
        throw ValidationError(path.filename().string() + ":" + std::to_string(lineno) +
                              ": malformed row: expected header " + first_name + "," +
                              second_name);
      continue;
    }
    if (a.empty() || b.empty())
      throw ValidationError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": malformed row: empty id");
    rows.emplace_back(std::move(a), std::move(b));
  }
  return rows;
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json_file(const std::filesystem::path& path) {
  const auto text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.filename().string() + ": malformed JSON: " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

void write_jsonl(const std::filesystem::path& path, const OutputHeader& header,
                 const std::vector<json>& rows) {
  std::string text = header.to_json().dump();
  text += '\n';
  for (const auto& r : rows) {
    text += r.dump();
    text += '\n';
  }
  write_text_file(path, text);
}

JsonlFile read_output_jsonl(const std::filesystem::path& path) {
  JsonlFile file;
  bool first = true;
  for_each_jsonl(path, [&](const json& obj, std::size_t) {
    if (first) {
      file.header = OutputHeader::from_json(obj);
      first = false;
    } else {
      file.rows.push_back(obj);
    }
  });
  if (first) throw ValidationError(path.filename().string() + ": missing header line");
  return file;
}

const json& require_key(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null())
    throw ValidationError(std::string("malformed row: missing required key '") + key + "'");
  return *it;
}

std::string require_string(const json& obj, const char* key) {
  const auto& v = require_key(obj, key);
  if (!v.is_string())
    throw ValidationError(std::string("malformed row: '") + key + "' must be a string");
  return v.get<std::string>();
}

int require_int(const json& obj, const char* key) {
  const auto& v = require_key(obj, key);
  if (!v.is_number_integer())
    throw ValidationError(std::string("malformed row: '") + key + "' must be an integer");
  return v.get<int>();
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string())
    throw ValidationError(std::string("malformed row: '") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<int> optional_int(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer())
    throw ValidationError(std::string("malformed row: '") + key + "' must be an integer");
  return it->get<int>();
}

std::vector<std::string> string_list(const json& obj, const char* key) {
  std::vector<std::string> out;
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return out;
  if (!it->is_array())
    throw ValidationError(std::string("malformed row: '") + key + "' must be a list");
  for (const auto& v : *it) {
    if (!v.is_string())
      throw ValidationError(std::string("malformed row: '") + key + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace sciflow

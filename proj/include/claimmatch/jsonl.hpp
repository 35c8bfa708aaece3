#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "claimmatch/error.hpp"

namespace claimmatch::jsonl {

inline std::vector<nlohmann::json> parse(std::istream& in, const std::string& origin = "<stream>") {
  std::vector<nlohmann::json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      rows.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::InvalidInput, origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

inline std::vector<nlohmann::json> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
  return parse(in, path.string());
}

template <typename T>
std::vector<T> read_as(const std::filesystem::path& path) {
  std::vector<T> out;
  std::size_t row = 0;
  for (const auto& j : read_file(path)) {
    ++row;
    try {
      out.push_back(j.get<T>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidInput, path.string() + ": row " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

/// One compact JSON document per line, LF endings, UTF-8.
template <typename Range>
std::string dump(const Range& items) {
  std::string out;
  for (const auto& item : items) {
    out += nlohmann::json(item).dump();
    out.push_back('\n');
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::InvalidInput, "cannot write " + path.string());
  out << text;
}

template <typename Range>
void write_file(const std::filesystem::path& path, const Range& items) {
  write_text(path, dump(items));
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace claimmatch::jsonl

// Copyright 2026 The promptac Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptac/csv.hpp"

#include <iterator>

namespace promptac::csv {

std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {

// Parses records from [pos, end). Returns false at end of input.
bool next_record(const std::string& text, std::size_t& pos, std::vector<std::string>& record) {
  record.clear();
  if (pos >= text.size()) return false;
  std::string field;
  bool quoted = false;
  while (pos < text.size()) {
    const char c = text[pos++];
    if (quoted) {
      if (c == '"') {
        if (pos < text.size() && text[pos] == '"') {
          field += '"';
          ++pos;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  record.push_back(std::move(field));
  return true;
}

}  // namespace

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> record;
  std::size_t pos = 0;
  if (!next_record(line, pos, record)) record.emplace_back();
  return record;
}

std::vector<std::vector<std::string>> read_records(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> record;
  std::size_t pos = 0;
  while (next_record(text, pos, record)) {
    if (record.size() == 1 && record.front().empty()) continue;
    out.push_back(record);
  }
  return out;
}

}  // namespace promptac::csv

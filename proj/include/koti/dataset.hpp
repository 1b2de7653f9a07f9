#pragma once

// Note datasets on disk.
//
//   jsonl  one object per line: {"id": str, "text": str, "label": str|null}
//          (label optional); blank lines are skipped.
//   csv    RFC 4180; header row naming id, text and optionally label in any
//          order; quoted fields may span lines.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "koti/error.hpp"
#include "koti/text.hpp"

namespace koti {

enum class DataFormat { Jsonl, Csv };

inline DataFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = detail::lowercase(path.extension().string());
  if (ext == ".csv") return DataFormat::Csv;
  if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") return DataFormat::Jsonl;
  throw ConfigError("cannot infer dataset format from '" + path.string() +
                    "'; use .jsonl or .csv");
}

namespace detail {

inline void check_unique(std::unordered_set<std::string>& seen, const Note& n,
                         std::size_t line) {
  if (!seen.insert(n.id).second)
    throw DuplicateId("duplicate note id '" + n.id + "' at line " + std::to_string(line));
}

inline ParseError parse_error(std::size_t line, const std::string& what) {
  return ParseError("line " + std::to_string(line) + ": " + what);
}

}  // namespace detail

inline std::vector<Note> parse_jsonl(std::istream& in) {
  std::vector<Note> notes;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      throw detail::parse_error(lineno, "invalid JSON");
    }
    if (!j.is_object()) throw detail::parse_error(lineno, "expected a JSON object");
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>().empty())
      throw detail::parse_error(lineno, "missing or empty string field 'id'");
    if (!j.contains("text") || !j["text"].is_string())
      throw detail::parse_error(lineno, "missing string field 'text'");
    Note n{j["id"].get<std::string>(), j["text"].get<std::string>(), std::nullopt};
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_string()) throw detail::parse_error(lineno, "'label' must be a string");
      n.label = j["label"].get<std::string>();
    }
    detail::check_unique(seen, n, lineno);
    notes.push_back(std::move(n));
  }
  return notes;
}

inline std::vector<Note> parse_csv(std::istream& in) {
  struct Record {
    std::vector<std::string> fields;
    std::size_t line;
  };
  std::vector<Record> records;
  {
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t line = 1;
    std::size_t i = 0;
    while (i < data.size()) {
      Record rec{{}, line};
      std::string field;
      bool done = false;
      while (!done) {
        if (i < data.size() && data[i] == '"') {
          const std::size_t open_line = line;
          ++i;
          for (;;) {
            if (i >= data.size()) throw detail::parse_error(open_line, "unterminated quoted field");
            if (data[i] == '"') {
              if (i + 1 < data.size() && data[i + 1] == '"') {
                field.push_back('"');
                i += 2;
                continue;
              }
              ++i;
              break;
            }
            if (data[i] == '\n') ++line;
            field.push_back(data[i++]);
          }
          if (i < data.size() && data[i] != ',' && data[i] != '\n' && data[i] != '\r')
            throw detail::parse_error(line, "unexpected character after closing quote");
        } else {
          while (i < data.size() && data[i] != ',' && data[i] != '\n' && data[i] != '\r') {
            if (data[i] == '"') throw detail::parse_error(line, "stray quote in unquoted field");
            field.push_back(data[i++]);
          }
        }
        rec.fields.push_back(std::move(field));
        field.clear();
        if (i < data.size() && data[i] == ',') {
          ++i;
          continue;
        }
        if (i < data.size() && data[i] == '\r') ++i;
        if (i < data.size() && data[i] == '\n') {
          ++i;
          ++line;
        }
        done = true;
      }
      if (!(rec.fields.size() == 1 && rec.fields[0].empty())) records.push_back(std::move(rec));
    }
  }

  std::vector<Note> notes;
  if (records.empty()) return notes;
  const auto& header = records.front().fields;
  std::optional<std::size_t> id_col, text_col, label_col;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "id") id_col = c;
    else if (header[c] == "text") text_col = c;
    else if (header[c] == "label") label_col = c;
  }
  if (!id_col || !text_col)
    throw detail::parse_error(records.front().line, "header must name 'id' and 'text' columns");

  std::unordered_set<std::string> seen;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != header.size())
      throw detail::parse_error(rec.line, "expected " + std::to_string(header.size()) +
                                              " fields, found " + std::to_string(rec.fields.size()));
    Note n{rec.fields[*id_col], rec.fields[*text_col], std::nullopt};
    if (n.id.empty()) throw detail::parse_error(rec.line, "empty id");
    if (label_col && !rec.fields[*label_col].empty()) n.label = rec.fields[*label_col];
    detail::check_unique(seen, n, rec.line);
    notes.push_back(std::move(n));
  }
  return notes;
}

inline std::vector<Note> load_dataset(const std::filesystem::path& path,
                                      std::optional<DataFormat> format = std::nullopt) {
  const auto fmt = format ? *format : format_from_path(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset " + path.string());
  return fmt == DataFormat::Csv ? parse_csv(in) : parse_jsonl(in);
}

inline void write_jsonl(std::ostream& out, std::span<const Note> notes) {
  for (const auto& n : notes) {
    nlohmann::json j{{"id", n.id}, {"text", n.text}};
    j["label"] = n.label ? nlohmann::json(*n.label) : nlohmann::json();
    out << j.dump() << '\n';
  }
}

inline void write_csv(std::ostream& out, std::span<const Note> notes) {
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  out << "id,text,label\n";
  for (const auto& n : notes)
    out << quote(n.id) << ',' << quote(n.text) << ',' << (n.label ? quote(*n.label) : "") << '\n';
}

inline const Note& find_note(std::span<const Note> notes, const std::string& id) {
  for (const auto& n : notes)
    if (n.id == id) return n;
  throw UnknownNoteId("no note with id '" + id + "'");
}

}  // namespace koti

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sitesel/error.hpp"

namespace sitesel::csv {

struct Row {
  std::size_t line = 0;  ///< 1-based line where the record starts
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

/// RFC-4180 reader: comma separator, double-quote quoting with "" escapes,
/// CRLF or LF line endings, optional UTF-8 BOM. Blank lines are skipped.
/// The first record is the header.
inline Table parse(std::string_view text, std::string_view file = {}) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<Row> records;
  Row cur;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool record_has_content = false;
  std::size_t line = 1;
  cur.line = 1;

  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_quoted = false;
  };
  auto end_record = [&] {
    if (record_has_content) {
      end_field();
      records.push_back(std::move(cur));
    }
    cur = Row{};
    field.clear();
    field_quoted = false;
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (!record_has_content) cur.line = line;
    switch (c) {
      case '"':
        if (!field.empty() || field_quoted)
          throw parse_error(file, line, "unexpected quote inside unquoted field");
        in_quotes = true;
        field_quoted = true;
        record_has_content = true;
        break;
      case ',':
        record_has_content = true;
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        if (field_quoted) throw parse_error(file, line, "characters after closing quote");
        field.push_back(c);
        record_has_content = true;
    }
  }
  if (in_quotes) throw parse_error(file, cur.line, "unterminated quoted field");
  end_record();

  Table table;
  if (records.empty()) throw parse_error(file, 0, "missing header row");
  table.header = std::move(records.front().fields);
  records.erase(records.begin());
  table.rows = std::move(records);
  return table;
}

/// Quotes a field when it contains a separator, quote or line break.
inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(fields[i]);
  }
  out.push_back('\n');
  return out;
}

}  // namespace sitesel::csv

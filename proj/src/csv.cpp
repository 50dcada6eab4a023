#include "streetscape/csv.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "streetscape/error.hpp"

namespace streetscape::csv {

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out.push_back(',');
    out += escape(row[i]);
  }
  out.push_back('\n');
  return out;
}

std::vector<Record> parse(std::string_view text) {
  std::vector<Record> records;
  std::size_t pos = 0;
  std::size_t line = 1;
  while (pos < text.size()) {
    Record rec;
    rec.line = line;
    std::string field;
    bool done = false;
    while (!done) {
      if (pos < text.size() && text[pos] == '"') {
        ++pos;
        for (;;) {
          if (pos >= text.size()) {
            throw ParseError(fmt::format("line {}: unterminated quoted field", rec.line), pos);
          }
          const char c = text[pos++];
          if (c == '"') {
            if (pos < text.size() && text[pos] == '"') {
              field.push_back('"');
              ++pos;
            } else {
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
          }
        }
      } else {
        while (pos < text.size() && text[pos] != ',' && text[pos] != '\n' && text[pos] != '\r') {
          if (text[pos] == '"') {
            throw ParseError(fmt::format("line {}: stray quote in unquoted field", line), pos);
          }
          field.push_back(text[pos++]);
        }
      }
      if (pos >= text.size()) {
        throw ParseError(fmt::format("line {}: record not terminated by newline", rec.line), pos);
      }
      const char sep = text[pos];
      if (sep == ',') {
        ++pos;
        rec.fields.push_back(std::move(field));
        field.clear();
      } else if (sep == '\n' || sep == '\r') {
        ++pos;
        if (sep == '\r') {
          if (pos < text.size() && text[pos] == '\n') {
            ++pos;
          }
        }
        ++line;
        rec.fields.push_back(std::move(field));
        done = true;
      } else {
        throw ParseError(fmt::format("line {}: unexpected character after quoted field", line),
                         pos);
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<Record> parse_with_header(std::string_view text, const Row& header,
                                      std::string_view what) {
  auto records = parse(text);
  if (records.empty() || records.front().fields != header) {
    throw ParseError(fmt::format("{}: line 1: expected header '{}'", what,
                                 fmt::join(header, ",")),
                     0);
  }
  for (const auto& rec : records) {
    if (rec.fields.size() != header.size()) {
      throw ParseError(fmt::format("{}: line {}: expected {} fields, found {}", what, rec.line,
                                   header.size(), rec.fields.size()),
                       0);
    }
  }
  records.erase(records.begin());
  return records;
}

}  // namespace streetscape::csv

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace streetscape::csv {

using Row = std::vector<std::string>;

/// Quotes a field when it contains a comma, quote, CR or LF (RFC 4180).
std::string escape(std::string_view field);

/// Serializes one record terminated by '\n'.
std::string format_row(const Row& row);

struct Record {
  Row fields;
  std::size_t line = 0;  ///< 1-based physical line where the record starts
};

/// Parses a whole document. Throws ParseError naming the line of the first
/// malformed record (unterminated quote, stray quote, missing final newline).
std::vector<Record> parse(std::string_view text);

/// Parses and checks that the first record equals `header` and every record has
/// the header's width.
std::vector<Record> parse_with_header(std::string_view text, const Row& header,
                                      std::string_view what);

}  // namespace streetscape::csv

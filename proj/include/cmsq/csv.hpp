#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

#include "cmsq/errors.hpp"

namespace cmsq {

struct CsvRecord {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

// Streaming RFC 4180 reader: comma separated, double-quote quoting with ""
// escapes, quoted fields may span lines, LF or CRLF terminators.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // False at end of input. Blank lines are skipped.
  bool next(CsvRecord& rec) {
    while (true) {
      rec.fields.clear();
      rec.line = line_;
      if (in_.peek() == std::char_traits<char>::eof()) return false;
      if (!read_record(rec.fields)) return false;
      if (rec.fields.size() == 1 && rec.fields[0].empty() && !last_had_quotes_) continue;
      return true;
    }
  }

  std::size_t line() const noexcept { return line_; }

 private:
  bool read_record(std::vector<std::string>& fields) {
    std::string field;
    bool quoted = false;
    bool any_quotes = false;
    const std::size_t start_line = line_;
    while (true) {
      const int ch = in_.get();
      if (ch == std::char_traits<char>::eof()) {
        if (quoted) {
          throw DataError("unterminated quoted field starting on line " + std::to_string(start_line));
        }
        fields.push_back(std::move(field));
        last_had_quotes_ = any_quotes;
        return true;
      }
      const char c = static_cast<char>(ch);
      if (quoted) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get();
            field.push_back('"');
          } else {
            quoted = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      switch (c) {
        case '"':
          quoted = true;
          any_quotes = true;
          break;
        case ',':
          fields.push_back(std::move(field));
          field.clear();
          break;
        case '\r':
          if (in_.peek() == '\n') break;
          field.push_back(c);
          break;
        case '\n':
          ++line_;
          fields.push_back(std::move(field));
          last_had_quotes_ = any_quotes;
          return true;
        default:
          field.push_back(c);
      }
    }
  }

  std::istream& in_;
  std::size_t line_ = 1;
  bool last_had_quotes_ = false;
};

}  // namespace cmsq

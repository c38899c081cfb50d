#pragma once

#include <optional>
#include <string>
#include <vector>

namespace relcomp {

// RFC-4180-style CSV reader: quoted fields, escaped quotes, CRLF tolerant,
// UTF-8 passed through untouched. An unquoted empty field and a quoted empty
// string are distinguishable to callers via CsvField::quoted (the dataset
// layer treats bare `""` as null).
struct CsvField {
  std::string text;
  bool quoted = false;
};

class CsvReader {
 public:
  explicit CsvReader(const std::string& path);

  // Reads the next record; false at end of input. Throws ParseError on
  // malformed quoting.
  bool next(std::vector<CsvField>& fields);

  size_t line() const { return line_; }

 private:
  std::string data_;
  size_t pos_ = 0;
  size_t line_ = 1;
};

// Writes one CSV record with minimal quoting.
std::string csv_join(const std::vector<std::string>& fields);

}  // namespace relcomp

#include "relcomp/csv.hpp"

#include <fstream>
#include <sstream>

#include "relcomp/errors.hpp"

namespace relcomp {

CsvReader::CsvReader(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open CSV file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  data_ = buf.str();
}

bool CsvReader::next(std::vector<CsvField>& fields) {
  fields.clear();
  if (pos_ >= data_.size()) return false;

  CsvField field;
  bool in_quotes = false;
  bool field_started_quoted = false;
  for (;;) {
    if (pos_ >= data_.size()) {
      if (in_quotes) throw ParseError("unterminated quote at end of CSV input");
      fields.push_back(std::move(field));
      return true;
    }
    char c = data_[pos_];
    if (in_quotes) {
      if (c == '"') {
        if (pos_ + 1 < data_.size() && data_[pos_ + 1] == '"') {
          field.text += '"';
          pos_ += 2;
        } else {
          in_quotes = false;
          ++pos_;
        }
      } else {
        if (c == '\n') ++line_;
        field.text += c;
        ++pos_;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.text.empty() || field_started_quoted)
          throw ParseError("stray quote in CSV field at line " + std::to_string(line_));
        in_quotes = true;
        field_started_quoted = true;
        field.quoted = true;
        ++pos_;
        break;
      case ',':
        fields.push_back(std::move(field));
        field = CsvField{};
        field_started_quoted = false;
        ++pos_;
        break;
      case '\r':
        ++pos_;
        break;
      case '\n':
        ++pos_;
        ++line_;
        fields.push_back(std::move(field));
        return true;
      default:
        field.text += c;
        ++pos_;
        break;
    }
  }
}

std::string csv_join(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n\r") != std::string::npos) {
      out += '"';
      for (char c : f) {
        if (c == '"') out += '"';
        out += c;
      }
      out += '"';
    } else {
      out += f;
    }
  }
  return out;
}

}  // namespace relcomp

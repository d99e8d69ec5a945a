#include "gridtopo/csv.hpp"

#include <cassert>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gridtopo/error.hpp"

namespace gridtopo {

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::size_t CsvTable::require(const std::string& name, const std::string& file) const {
  const int idx = column(name);
  if (idx < 0) {
    throw SchemaError("missing required column '" + name + "' in " + file);
  }
  return static_cast<std::size_t>(idx);
}

namespace {

std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;

  auto end_field = [&] {
    fields.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    records.push_back(std::move(fields));
    fields.clear();
    row_has_content = false;
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
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        end_field();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty() || !fields.empty()) end_row();
        break;
      default:
        field.push_back(c);
        row_has_content = true;
    }
  }
  if (row_has_content || !field.empty() || !fields.empty()) end_row();
  return records;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  auto records = parse_records(text);
  if (records.empty()) throw SchemaError("empty CSV input");
  CsvTable table;
  table.header = std::move(records.front());
  table.rows.assign(std::make_move_iterator(records.begin() + 1),
                    std::make_move_iterator(records.end()));
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str());
  } catch (const SchemaError&) {
    throw SchemaError("empty CSV file " + path);
  }
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void write_csv_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << csv_escape(fields[i]);
  }
  os << '\n';
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  assert(res.ec == std::errc());
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double_cell(const std::string& cell) {
  std::size_t begin = cell.find_first_not_of(" \t");
  if (begin == std::string::npos) return std::nullopt;
  std::size_t end = cell.find_last_not_of(" \t") + 1;
  const std::string trimmed = cell.substr(begin, end - begin);
  if (trimmed == "inf") return std::numeric_limits<double>::infinity();
  if (trimmed == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0.0;
  auto res = std::from_chars(trimmed.data(), trimmed.data() + trimmed.size(), value);
  if (res.ec != std::errc() || res.ptr != trimmed.data() + trimmed.size()) return std::nullopt;
  return value;
}

}  // namespace gridtopo

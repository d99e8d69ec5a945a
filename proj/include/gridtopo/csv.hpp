#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace gridtopo {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a column, or -1 when absent.
  int column(const std::string& name) const;
  // Index of a column; throws SchemaError naming the column when absent.
  std::size_t require(const std::string& name, const std::string& file) const;
};

// RFC 4180-style reader: quoted fields, doubled quotes, CRLF tolerated.
// Throws IoError when the file cannot be opened, SchemaError on an empty file.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

std::string csv_escape(const std::string& field);
void write_csv_row(std::ostream& os, const std::vector<std::string>& fields);

// Shortest decimal string that parses back to exactly the same double.
// NaN renders as an empty string (the CSV missing marker).
std::string fmt_double(double v);

// Empty or whitespace-only cells give nullopt; garbage also gives nullopt.
std::optional<double> parse_double_cell(const std::string& cell);

}  // namespace gridtopo

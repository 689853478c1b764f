#pragma once

#include <string>
#include <vector>

namespace loaddev::csv {

/// A parsed CSV file: one header row plus data rows, all cells as text.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1 if absent.
  int column(const std::string& name) const;

  /// Index of a header column; throws ValidationError naming the column.
  int require_column(const std::string& name, const std::string& context) const;
};

/// Parse CSV text (RFC-style quoting, UTF-8, '\n' or '\r\n' line ends).
/// `context` names the source in error messages, e.g. "shots.csv".
Table parse(const std::string& text, const std::string& context);

Table read_file(const std::string& path);

/// Serialize with minimal quoting.  Lines end with '\n'.
std::string to_string(const Table& table);

void write_file(const Table& table, const std::string& path);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

double parse_double(const std::string& cell, const std::string& context);
long parse_long(const std::string& cell, const std::string& context);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace loaddev::csv

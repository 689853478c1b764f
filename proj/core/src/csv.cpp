#include "loaddev/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "loaddev/errors.hpp"

namespace loaddev::csv {

namespace {

bool needs_quoting(const std::string& cell) {
  return cell.find_first_of(",\"\n\r") != std::string::npos;
}

std::string quote(const std::string& cell) {
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

int Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

int Table::require_column(const std::string& name, const std::string& context) const {
  const int idx = column(name);
  if (idx < 0) {
    throw ValidationError(context + ": missing required column '" + name + "'");
  }
  return idx;
}

Table parse(const std::string& text, const std::string& context) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string cell;
  bool in_quotes = false;
  bool cell_started = false;

  auto end_cell = [&] {
    record.push_back(cell);
    cell.clear();
    cell_started = false;
  };
  auto end_record = [&] {
    end_cell();
    records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"' && !cell_started && cell.empty()) {
      in_quotes = true;
      cell_started = true;
    } else if (c == ',') {
      end_cell();
    } else if (c == '\n') {
      end_record();
    } else if (c == '\r') {
      // swallowed; '\n' (if any) ends the record
    } else {
      cell += c;
      cell_started = true;
    }
  }
  if (in_quotes) {
    throw ValidationError(context + ": unterminated quoted cell");
  }
  if (cell_started || !cell.empty() || !record.empty()) {
    end_record();
  }

  if (records.empty()) {
    throw ValidationError(context + ": file is empty");
  }

  Table table;
  table.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() == 1 && records[r][0].empty()) continue;  // blank line
    if (records[r].size() != table.header.size()) {
      throw ValidationError(context + ": row " + std::to_string(r) + " has " +
                            std::to_string(records[r].size()) + " cells, expected " +
                            std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(records[r]));
  }
  return table;
}

Table read_file(const std::string& path) {
  return parse(read_text_file(path), path);
}

std::string to_string(const Table& table) {
  std::string out;
  auto append_row = [&out](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += needs_quoting(row[i]) ? quote(row[i]) : row[i];
    }
    out += '\n';
  };
  append_row(table.header);
  for (const auto& row : table.rows) append_row(row);
  return out;
}

void write_file(const Table& table, const std::string& path) {
  write_text_file(path, to_string(table));
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& cell, const std::string& context) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || end != begin + cell.size() || errno == ERANGE) {
    throw ValidationError(context + ": cannot parse '" + cell + "' as a number");
  }
  return v;
}

long parse_long(const std::string& cell, const std::string& context) {
  long v = 0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
    throw ValidationError(context + ": cannot parse '" + cell + "' as an integer");
  }
  return v;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ValidationError("cannot open file: " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ValidationError("cannot write file: " + path);
  }
  out << content;
  if (!out.flush()) {
    throw ValidationError("write failed: " + path);
  }
}

}  // namespace loaddev::csv

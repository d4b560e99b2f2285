#pragma once

#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <unordered_set>
#include <vector>

#include "rcgps/errors.hpp"
#include "rcgps/tabular.hpp"

namespace rcgps {

namespace detail {

// Splits one CSV record. Handles quoted fields and trailing CR; embedded
// newlines are not supported since the body is numeric.
inline std::vector<std::string> split_csv_record(const std::string& line,
                                                 std::size_t row_for_errors) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
    } else if (ch == '"' && field.empty()) {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (ch == '\r' && i + 1 == line.size()) {
      // trailing CR from CRLF files
    } else {
      field.push_back(ch);
    }
  }
  if (quoted)
    throw parse_error("unterminated quote in row " +
                      std::to_string(row_for_errors));
  fields.push_back(std::move(field));
  return fields;
}

inline double parse_numeric_cell(const std::string& cell, std::size_t row,
                                 const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
  while (end != begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || begin == end)
    throw parse_error("non-numeric cell '" + cell + "' at row " +
                      std::to_string(row) + ", column '" + column + "'");
  return value;
}

// Shortest round-trip representation; re-reading recovers the exact double.
inline void append_double(std::string& out, double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

}  // namespace detail

// Reads an RFC-4180-style CSV with a header row and a numeric body.
// Errors carry the 1-based row and the column name.
inline TabularDataset read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open CSV file '" + path + "'");

  std::string line;
  if (!std::getline(in, line))
    throw parse_error("CSV file '" + path + "' is empty (no header row)");
  const std::vector<std::string> header = detail::split_csv_record(line, 1);

  std::unordered_set<std::string> seen;
  for (const auto& name : header) {
    if (name.empty())
      throw parse_error("empty column name in header of '" + path + "'");
    if (!seen.insert(name).second)
      throw parse_error("duplicate header '" + name + "' in '" + path + "'");
  }

  std::vector<std::vector<double>> columns(header.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    const auto fields = detail::split_csv_record(line, row);
    if (fields.size() != header.size())
      throw parse_error("ragged row " + std::to_string(row) + " in '" + path +
                        "': got " + std::to_string(fields.size()) +
                        " cells, expected " + std::to_string(header.size()));
    for (std::size_t c = 0; c < fields.size(); ++c)
      columns[c].push_back(detail::parse_numeric_cell(fields[c], row, header[c]));
  }

  TabularDataset out;
  for (std::size_t c = 0; c < header.size(); ++c)
    out.add_column(header[c], std::move(columns[c]));
  return out;
}

inline std::string to_csv_string(const TabularDataset& dataset) {
  std::string out;
  const auto& names = dataset.column_names();
  for (std::size_t c = 0; c < names.size(); ++c) {
    if (c > 0) out.push_back(',');
    out += names[c];
  }
  out.push_back('\n');
  for (std::size_t r = 0; r < dataset.n_rows(); ++r) {
    for (std::size_t c = 0; c < names.size(); ++c) {
      if (c > 0) out.push_back(',');
      detail::append_double(out, dataset.column(names[c])[r]);
    }
    out.push_back('\n');
  }
  return out;
}

inline void write_csv(const TabularDataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open '" + path + "' for writing");
  out << to_csv_string(dataset);
  if (!out) throw data_error("failed while writing '" + path + "'");
}

}  // namespace rcgps

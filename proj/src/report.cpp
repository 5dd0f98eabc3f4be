#include "qreg/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "qreg/errors.hpp"

namespace qreg {

void Table::add_row(std::vector<Cell> row) {
  if (row.size() != columns.size()) {
    throw UsageError("report row has " + std::to_string(row.size()) +
                     " cells, expected " + std::to_string(columns.size()));
  }
  rows.push_back(std::move(row));
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

namespace {

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string cell_text(const Cell& cell) {
  if (const double* d = std::get_if<double>(&cell)) return format_double(*d);
  return std::get<std::string>(cell);
}

}  // namespace

std::string to_csv(const Table& table) {
  std::string out;
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out += ',';
    out += csv_escape(table.columns[j]);
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += csv_escape(cell_text(row[j]));
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const Table& table) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (const double* d = std::get_if<double>(&row[j]);
          d && std::isfinite(*d)) {
        // Serialized via the fixed text form so CSV and JSON agree digit
        // for digit across runs.
        obj[table.columns[j]] =
            nlohmann::ordered_json::parse(format_double(*d));
      } else if (const double* nf = std::get_if<double>(&row[j])) {
        obj[table.columns[j]] = format_double(*nf);
      } else {
        obj[table.columns[j]] = std::get<std::string>(row[j]);
      }
    }
    rows.push_back(std::move(obj));
  }
  return rows.dump(2) + "\n";
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open output file '" + path + "'");
  }
  out << text;
  if (!out) {
    throw DataError("failed writing output file '" + path + "'");
  }
}

}  // namespace qreg

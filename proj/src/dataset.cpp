#include "qreg/dataset.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "qreg/errors.hpp"

namespace qreg {

void Dataset::add_column(const std::string& name, Column column) {
  if (index_.count(name)) {
    throw DataError("duplicate column '" + name + "'");
  }
  if (names_.empty()) {
    n_rows_ = column.size();
    if (n_rows_ == 0) {
      throw DataError("column '" + name + "' is empty");
    }
  } else if (column.size() != n_rows_) {
    throw DataError("column '" + name + "' has " +
                    std::to_string(column.size()) + " rows, expected " +
                    std::to_string(n_rows_));
  }
  if (column.missing.size() != column.size()) {
    column.missing.assign(column.size(), 0);
  }
  if (column.type == ColumnType::binary) {
    for (std::size_t i = 0; i < column.values.size(); ++i) {
      if (!column.missing[i] && column.values[i] != 0.0 &&
          column.values[i] != 1.0) {
        throw DataError("non-binary value in column '" + name + "' at row " +
                        std::to_string(i + 1));
      }
    }
  }
  index_[name] = names_.size();
  names_.push_back(name);
  columns_.push_back(std::move(column));
}

bool Dataset::has_column(const std::string& name) const {
  return index_.count(name) != 0;
}

const Column& Dataset::column(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw DataError("no such column '" + name + "'");
  }
  return columns_[it->second];
}

namespace {

// RFC 4180-ish: quoted fields may contain commas, newlines and "" escapes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const std::string& origin) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        row_started = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_started || !field.empty() || !row.empty()) {
          row.push_back(std::move(field));
          field.clear();
          rows.push_back(std::move(row));
          row.clear();
          row_started = false;
        }
        break;
      default:
        field += c;
        row_started = true;
    }
  }
  if (in_quotes) {
    throw DataError(origin + ": unterminated quoted field");
  }
  if (row_started || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool is_missing_cell(const std::string& cell) {
  return cell.empty() || cell == "NA";
}

double parse_number(const std::string& cell, const std::string& column,
                    std::size_t row) {
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc() || ptr != cell.data() + cell.size()) {
    throw DataError("non-numeric cell '" + cell + "' in continuous column '" +
                    column + "' at row " + std::to_string(row));
  }
  return value;
}

}  // namespace

Dataset parse_dataset(const std::string& csv_text,
                      const std::vector<ColumnSpec>& schema,
                      const std::string& origin) {
  auto rows = parse_csv(csv_text, origin);
  if (rows.empty()) {
    throw DataError(origin + ": empty file (no header row)");
  }
  const auto& header = rows.front();
  std::unordered_map<std::string, std::size_t> header_index;
  for (std::size_t j = 0; j < header.size(); ++j) {
    header_index[header[j]] = j;
  }
  const std::size_t n = rows.size() - 1;
  if (n == 0) {
    throw DataError(origin + ": no data rows");
  }

  Dataset ds;
  for (const auto& spec : schema) {
    auto it = header_index.find(spec.name);
    if (it == header_index.end()) {
      throw DataError(origin + ": declared column '" + spec.name +
                      "' not found in header");
    }
    const std::size_t j = it->second;
    Column col;
    col.type = spec.type;
    col.missing.assign(n, 0);
    if (spec.type == ColumnType::categorical) {
      col.labels.assign(n, "");
    } else {
      col.values.assign(n, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& record = rows[i + 1];
      if (j >= record.size()) {
        throw DataError(origin + ": row " + std::to_string(i + 1) +
                        " has too few fields");
      }
      const std::string& cell = record[j];
      if (is_missing_cell(cell)) {
        col.missing[i] = 1;
        continue;
      }
      if (spec.type == ColumnType::categorical) {
        col.labels[i] = cell;
      } else {
        double v = parse_number(cell, spec.name, i + 1);
        if (spec.type == ColumnType::binary && v != 0.0 && v != 1.0) {
          throw DataError("non-binary value '" + cell + "' in column '" +
                          spec.name + "' at row " + std::to_string(i + 1));
        }
        col.values[i] = v;
      }
    }
    ds.add_column(spec.name, std::move(col));
  }
  return ds;
}

Dataset load_dataset(const std::string& path,
                     const std::vector<ColumnSpec>& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open file '" + path + "'");
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), schema, path);
}

std::vector<double> decadal_growth(const GdpSeries& series) {
  if (series.periods.size() != series.values.size()) {
    throw DataError("GDP series '" + series.unit +
                    "': periods and values differ in length");
  }
  if (series.periods.size() < 2) {
    throw DataError("GDP series '" + series.unit +
                    "': need at least two periods");
  }
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    if (!(series.values[i] > 0.0)) {
      throw DataError("GDP series '" + series.unit +
                      "': nonpositive value at period " +
                      std::to_string(series.periods[i]));
    }
    if (i > 0 && series.periods[i] <= series.periods[i - 1]) {
      throw DataError("GDP series '" + series.unit +
                      "': periods not strictly increasing");
    }
  }
  std::vector<double> growth(series.values.size() - 1);
  for (std::size_t i = 0; i + 1 < series.values.size(); ++i) {
    growth[i] = (series.values[i + 1] - series.values[i]) / series.values[i];
  }
  return growth;
}

}  // namespace qreg

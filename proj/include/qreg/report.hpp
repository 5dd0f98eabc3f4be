#ifndef QREG_REPORT_HPP
#define QREG_REPORT_HPP

#include <string>
#include <variant>
#include <vector>

namespace qreg {

using Cell = std::variant<double, std::string>;

// Minimal column table behind every CLI report; renders to CSV (header =
// column names) or JSON (array of row objects with the same keys).
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add_row(std::vector<Cell> row);
};

std::string format_double(double value);

std::string to_csv(const Table& table);
std::string to_json(const Table& table);

// Writes text to path, or to stdout when path is "-".
void write_output(const std::string& path, const std::string& text);

}  // namespace qreg

#endif  // QREG_REPORT_HPP

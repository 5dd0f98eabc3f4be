#ifndef QREG_DATASET_HPP
#define QREG_DATASET_HPP

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

namespace qreg {

enum class ColumnType { continuous, categorical, binary };

// One typed column. Continuous and binary columns store numeric values,
// categorical columns store labels. The missing mask always has one entry
// per row; a missing cell's value/label slot is unspecified.
struct Column {
  ColumnType type = ColumnType::continuous;
  std::vector<double> values;
  std::vector<std::string> labels;
  std::vector<char> missing;

  std::size_t size() const {
    return type == ColumnType::categorical ? labels.size() : values.size();
  }
};

struct ColumnSpec {
  std::string name;
  ColumnType type;
};

// Immutable after construction; columns keep insertion order.
class Dataset {
 public:
  void add_column(const std::string& name, Column column);

  bool has_column(const std::string& name) const;
  const Column& column(const std::string& name) const;
  const std::vector<std::string>& column_names() const { return names_; }
  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_columns() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<Column> columns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t n_rows_ = 0;
};

// Loads the declared columns from a headered CSV file. Cells equal to "NA"
// or empty are marked missing. Undeclared columns are ignored.
Dataset load_dataset(const std::string& path,
                     const std::vector<ColumnSpec>& schema);

// Same parse applied to an already-read CSV text (used for round-trip checks).
Dataset parse_dataset(const std::string& csv_text,
                      const std::vector<ColumnSpec>& schema,
                      const std::string& origin = "<string>");

// GDP per capita for one unit over ordered periods.
struct GdpSeries {
  std::string unit;
  std::vector<int> periods;   // strictly increasing
  std::vector<double> values; // strictly positive
};

// Growth rate between consecutive periods: (v[t+1] - v[t]) / v[t].
// The final period has no defined growth, so the result has size - 1 entries.
std::vector<double> decadal_growth(const GdpSeries& series);

}  // namespace qreg

#endif  // QREG_DATASET_HPP

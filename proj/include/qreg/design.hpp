#ifndef QREG_DESIGN_HPP
#define QREG_DESIGN_HPP

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qreg/dataset.hpp"

namespace qreg {

struct DesignMatrix {
  Eigen::MatrixXd values;  // n x K
  std::vector<std::string> column_names;
  std::optional<Eigen::Index> intercept_index;
  std::map<std::string, std::string> dropped_levels;  // categorical -> base
  Eigen::Index rank = 0;
};

// Column layout request: intercept first (if requested), then continuous
// terms in declaration order, then one dummy block per categorical with the
// lexicographically first level dropped.
struct DesignSpec {
  std::string response;
  std::vector<std::string> continuous;
  std::vector<std::string> categorical;
  bool intercept = true;
};

struct DesignResult {
  DesignMatrix design;
  Eigen::VectorXd response;
  std::size_t dropped_rows = 0;  // listwise deletion over the used columns
  std::vector<std::size_t> kept_rows;  // dataset row index per design row
};

DesignResult build_design(const Dataset& dataset, const DesignSpec& spec);

}  // namespace qreg

#endif  // QREG_DESIGN_HPP

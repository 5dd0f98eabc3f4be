#include "qreg/design.hpp"

#include <algorithm>
#include <set>

#include "qreg/errors.hpp"

namespace qreg {

namespace {

void require_type(const Dataset& ds, const std::string& name,
                  ColumnType expected, const char* what) {
  const Column& col = ds.column(name);
  if (expected == ColumnType::continuous) {
    if (col.type == ColumnType::categorical) {
      throw DataError(std::string("column '") + name + "' is categorical; a " +
                      what + " term must be numeric");
    }
  } else if (col.type != expected) {
    throw DataError(std::string("column '") + name + "' is not categorical");
  }
}

}  // namespace

DesignResult build_design(const Dataset& dataset, const DesignSpec& spec) {
  if (spec.response.empty()) {
    throw DataError("build_design: no response column given");
  }
  require_type(dataset, spec.response, ColumnType::continuous, "response");
  for (const auto& name : spec.continuous) {
    require_type(dataset, name, ColumnType::continuous, "continuous");
  }
  for (const auto& name : spec.categorical) {
    require_type(dataset, name, ColumnType::categorical, "fixed-effect");
  }

  const std::size_t n_all = dataset.n_rows();
  std::vector<std::string> used = {spec.response};
  used.insert(used.end(), spec.continuous.begin(), spec.continuous.end());
  used.insert(used.end(), spec.categorical.begin(), spec.categorical.end());

  // Listwise deletion over the columns actually used.
  std::vector<std::size_t> keep;
  keep.reserve(n_all);
  for (std::size_t i = 0; i < n_all; ++i) {
    bool complete = true;
    for (const auto& name : used) {
      if (dataset.column(name).missing[i]) {
        complete = false;
        break;
      }
    }
    if (complete) keep.push_back(i);
  }
  const std::size_t n = keep.size();

  DesignResult out;
  out.dropped_rows = n_all - n;

  // Levels per categorical, lexicographic; first level is the dropped base.
  std::vector<std::vector<std::string>> level_sets;
  for (const auto& name : spec.categorical) {
    const Column& col = dataset.column(name);
    std::set<std::string> levels;
    for (std::size_t i : keep) levels.insert(col.labels[i]);
    if (levels.empty()) {
      throw DataError("categorical column '" + name +
                      "' has no observed levels after deletion");
    }
    level_sets.emplace_back(levels.begin(), levels.end());
    out.design.dropped_levels[name] = level_sets.back().front();
  }

  std::size_t k_total = (spec.intercept ? 1 : 0) + spec.continuous.size();
  for (const auto& levels : level_sets) k_total += levels.size() - 1;
  if (k_total == 0) {
    throw DataError("build_design: no regressors requested");
  }
  if (n < k_total) {
    throw DataError("build_design: " + std::to_string(n) +
                    " complete rows but " + std::to_string(k_total) +
                    " design columns");
  }

  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(k_total));
  std::vector<std::string> names;
  names.reserve(k_total);
  Eigen::Index k = 0;
  if (spec.intercept) {
    X.col(k).setOnes();
    names.push_back("(intercept)");
    out.design.intercept_index = k;
    ++k;
  }
  for (const auto& name : spec.continuous) {
    const Column& col = dataset.column(name);
    for (std::size_t r = 0; r < n; ++r) {
      X(static_cast<Eigen::Index>(r), k) = col.values[keep[r]];
    }
    names.push_back(name);
    ++k;
  }
  for (std::size_t c = 0; c < spec.categorical.size(); ++c) {
    const Column& col = dataset.column(spec.categorical[c]);
    const auto& levels = level_sets[c];
    for (std::size_t l = 1; l < levels.size(); ++l) {
      for (std::size_t r = 0; r < n; ++r) {
        if (col.labels[keep[r]] == levels[l]) {
          X(static_cast<Eigen::Index>(r), k) = 1.0;
        }
      }
      names.push_back(spec.categorical[c] + "=" + levels[l]);
      ++k;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const Eigen::Index rank = qr.rank();
  if (rank < X.cols()) {
    // The pivot order puts the dependent columns last.
    std::string dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = rank; j < X.cols(); ++j) {
      if (!dependent.empty()) dependent += ", ";
      dependent += names[static_cast<std::size_t>(perm[j])];
    }
    throw NumericError("design matrix is rank deficient (rank " +
                       std::to_string(rank) + " of " +
                       std::to_string(X.cols()) +
                       "); dependent columns: " + dependent);
  }

  const Column& resp = dataset.column(spec.response);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    y(static_cast<Eigen::Index>(r)) = resp.values[keep[r]];
  }

  out.design.values = std::move(X);
  out.design.column_names = std::move(names);
  out.design.rank = rank;
  out.response = std::move(y);
  out.kept_rows = std::move(keep);
  return out;
}

}  // namespace qreg

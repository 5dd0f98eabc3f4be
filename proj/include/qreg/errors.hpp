#ifndef QREG_ERRORS_HPP
#define QREG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace qreg {

// Bad user input: malformed flags, invalid tau grids, inconsistent options.
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems with the data itself: unreadable files, schema mismatches,
// non-binary values in binary columns, empty groups.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failures: rank deficiency, singular matrices, degenerate
// density estimates, relevance failures, non-convergence.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace qreg

#endif  // QREG_ERRORS_HPP

#ifndef QREG_QR_HPP
#define QREG_QR_HPP

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

namespace qreg {

struct SolverOptions {
  double optimality_tol = 1e-9;
  // |r| <= zero_tol * (1 + |y_i|) counts as a zero residual.
  double zero_tol = 1e-8;
  long max_iterations = 0;  // 0 = automatic
};

enum class SolverStatus { converged, max_iterations, degenerate };

struct QuantileFit {
  double tau = 0.5;
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  double objective = 0.0;
  std::size_t n_zero_residuals = 0;
  SolverStatus status = SolverStatus::converged;
  std::vector<std::string> warnings;
};

struct OlsFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  double ssr = 0.0;
};

// Asymmetric absolute loss: sum of tau*|r| over r >= 0 plus (1-tau)*|r|
// over r < 0.
double check_loss(std::span<const double> residuals, double tau);
double check_loss(const Eigen::VectorXd& residuals, double tau);

// Exact minimizer of the check loss via an exchange algorithm over exact-fit
// bases (vertices of the equivalent LP). Deterministic for fixed inputs.
QuantileFit fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         double tau, const SolverOptions& options = {});

// Independent fits over a strictly increasing tau grid.
std::vector<QuantileFit> fit_grid(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& y,
                                  const std::vector<double>& taus,
                                  const SolverOptions& options = {});

OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Exhaustive enumeration of all K-subsets in general position; globally
// optimal. Guarded to n <= 14, K <= 3.
QuantileFit brute_force_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            double tau);

}  // namespace qreg

#endif  // QREG_QR_HPP

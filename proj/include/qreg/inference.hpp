#ifndef QREG_INFERENCE_HPP
#define QREG_INFERENCE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qreg/qr.hpp"

namespace qreg {

enum class CovMethod { iid, sandwich, bootstrap, cluster_bootstrap };

std::string cov_method_name(CovMethod method);

struct CovarianceEstimate {
  Eigen::MatrixXd matrix;  // K x K, symmetric PSD
  CovMethod method = CovMethod::iid;
  double density_at_tau = 0.0;  // 0 when not density-based
  double bandwidth = 0.0;
  int replications = 0;   // resampling methods only
  int failed = 0;         // dropped replications
  std::uint64_t seed = 0;

  Eigen::VectorXd std_errors() const;
};

struct DensityEstimate {
  double value = 0.0;
  double bandwidth = 0.0;
};

// Hall-Sheather bandwidth on the probability scale.
double hall_sheather_bandwidth(std::size_t n, double tau);

// Sparsity-based density at the tau-th residual quantile:
// 2h / (Q_r(tau+h) - Q_r(tau-h)) over the empirical residual quantiles.
DensityEstimate estimate_density(const Eigen::VectorXd& residuals, double tau,
                                 std::optional<double> bandwidth = {});

// tau(1-tau)/(N f^2) * (X'X/N)^{-1} / N; valid under iid errors.
CovarianceEstimate covariance_iid(const QuantileFit& fit,
                                  const Eigen::MatrixXd& X);

// Heteroskedasticity-robust H^{-1} J H^{-1} form with Powell kernel weights
// f_i = K(r_i/h)/h, Gaussian K, bandwidth scaled by the residual MAD.
CovarianceEstimate covariance_sandwich(const QuantileFit& fit,
                                       const Eigen::MatrixXd& X,
                                       std::optional<double> bandwidth = {});

// Sandwich with caller-supplied per-observation densities. With all f_i
// equal this reduces exactly to the iid formula.
CovarianceEstimate covariance_sandwich_with_densities(
    const Eigen::MatrixXd& X, double tau, const Eigen::VectorXd& densities);

struct BootstrapOptions {
  int replications = 200;
  std::uint64_t seed = 0;
  std::optional<std::vector<std::string>> cluster_ids;
  int threads = 1;
  SolverOptions solver;
};

// Pairs bootstrap (rows, or whole clusters when cluster_ids is given).
// Replication b draws from a generator keyed by (seed, b), so results are
// identical for any thread count.
CovarianceEstimate bootstrap_cov(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, double tau,
                                 const BootstrapOptions& options);

struct BandEntry {
  double tau;
  std::string coefficient;
  double estimate;
  double std_error;
  double lower;
  double upper;
};

struct ConfidenceBand {
  double level = 0.95;
  std::vector<BandEntry> entries;  // one per (tau, coefficient)
};

ConfidenceBand confidence_band(const std::vector<QuantileFit>& fits,
                               const std::vector<CovarianceEstimate>& covs,
                               double level,
                               const std::vector<std::string>& names);

}  // namespace qreg

#endif  // QREG_INFERENCE_HPP

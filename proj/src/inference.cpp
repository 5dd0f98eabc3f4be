#include "qreg/inference.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "qreg/errors.hpp"
#include "qreg/normal.hpp"
#include "qreg/parallel.hpp"
#include "qreg/rng.hpp"

namespace qreg {

namespace {

// Type-1 (inf-based) quantile of an already sorted vector.
double sorted_quantile(const std::vector<double>& sorted, double p) {
  const std::size_t n = sorted.size();
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(p * static_cast<double>(n) - 1e-12));
  if (idx == 0) idx = 1;
  if (idx > n) idx = n;
  return sorted[idx - 1];
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

double residual_mad(const Eigen::VectorXd& r) {
  std::vector<double> work(r.data(), r.data() + r.size());
  std::nth_element(work.begin(), work.begin() + work.size() / 2, work.end());
  const double med = work[work.size() / 2];
  for (double& v : work) v = std::fabs(v - med);
  std::nth_element(work.begin(), work.begin() + work.size() / 2, work.end());
  return work[work.size() / 2];
}

}  // namespace

std::string cov_method_name(CovMethod method) {
  switch (method) {
    case CovMethod::iid:
      return "iid";
    case CovMethod::sandwich:
      return "sandwich";
    case CovMethod::bootstrap:
      return "bootstrap";
    case CovMethod::cluster_bootstrap:
      return "cluster-bootstrap";
  }
  return "unknown";
}

Eigen::VectorXd CovarianceEstimate::std_errors() const {
  Eigen::VectorXd se = matrix.diagonal();
  for (Eigen::Index i = 0; i < se.size(); ++i) {
    se[i] = std::sqrt(std::max(se[i], 0.0));
  }
  return se;
}

double hall_sheather_bandwidth(std::size_t n, double tau) {
  const double z = normal_quantile(tau);
  const double z975 = normal_quantile(0.975);
  const double phi = normal_pdf(z);
  return std::pow(static_cast<double>(n), -1.0 / 3.0) *
         std::pow(z975, 2.0 / 3.0) *
         std::cbrt(1.5 * phi * phi / (2.0 * z * z + 1.0));
}

DensityEstimate estimate_density(const Eigen::VectorXd& residuals, double tau,
                                 std::optional<double> bandwidth) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("estimate_density: tau must lie in (0,1)");
  }
  const std::size_t n = static_cast<std::size_t>(residuals.size());
  if (n < 2) {
    throw NumericError("estimate_density: need at least two residuals");
  }
  const double h =
      bandwidth ? *bandwidth : hall_sheather_bandwidth(n, tau);
  if (!(h > 0.0)) {
    throw UsageError("estimate_density: bandwidth must be positive");
  }
  constexpr double eps = 1e-6;
  const double lo = std::max(tau - h, eps);
  const double hi = std::min(tau + h, 1.0 - eps);

  std::vector<double> sorted(residuals.data(), residuals.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const double spread = sorted_quantile(sorted, hi) - sorted_quantile(sorted, lo);
  if (!(spread > 0.0)) {
    throw NumericError(
        "estimate_density: degenerate residual spread at tau=" +
        std::to_string(tau) + "; use bootstrap inference instead");
  }
  return {(hi - lo) / spread, h};
}

CovarianceEstimate covariance_iid(const QuantileFit& fit,
                                  const Eigen::MatrixXd& X) {
  const double tau = fit.tau;
  const Eigen::Index n = X.rows();
  if (n != fit.residuals.size()) {
    throw UsageError("covariance_iid: X and fit dimensions differ");
  }
  DensityEstimate density = estimate_density(fit.residuals, tau);

  Eigen::MatrixXd xtx = X.transpose() * X;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericError("covariance_iid: X'X is singular");
  }
  CovarianceEstimate cov;
  cov.method = CovMethod::iid;
  cov.density_at_tau = density.value;
  cov.bandwidth = density.bandwidth;
  cov.matrix = symmetrized(
      tau * (1.0 - tau) / (density.value * density.value) *
      ldlt.solve(Eigen::MatrixXd::Identity(X.cols(), X.cols())));
  return cov;
}

CovarianceEstimate covariance_sandwich_with_densities(
    const Eigen::MatrixXd& X, double tau, const Eigen::VectorXd& densities) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (densities.size() != n) {
    throw UsageError("covariance_sandwich: density vector length mismatch");
  }
  const double dn = static_cast<double>(n);
  Eigen::MatrixXd j_mat = X.transpose() * X / dn;
  Eigen::MatrixXd h_mat = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    h_mat.noalias() +=
        densities[i] * X.row(i).transpose() * X.row(i);
  }
  h_mat /= dn;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(symmetrized(h_mat));
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig <= 1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
    throw NumericError(
        "covariance_sandwich: H matrix singular (smallest eigenvalue " +
        std::to_string(min_eig) + ")");
  }
  Eigen::MatrixXd h_inv = h_mat.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  CovarianceEstimate cov;
  cov.method = CovMethod::sandwich;
  cov.matrix =
      symmetrized(tau * (1.0 - tau) / dn * h_inv * j_mat * h_inv);
  return cov;
}

CovarianceEstimate covariance_sandwich(const QuantileFit& fit,
                                       const Eigen::MatrixXd& X,
                                       std::optional<double> bandwidth) {
  const Eigen::Index n = X.rows();
  if (n != fit.residuals.size()) {
    throw UsageError("covariance_sandwich: X and fit dimensions differ");
  }
  double h;
  if (bandwidth) {
    h = *bandwidth;
  } else {
    const double mad = residual_mad(fit.residuals);
    const double scale =
        mad > 0.0 ? mad / 0.6744897501960817 : fit.residuals.norm() /
                                                   std::sqrt(double(n));
    if (!(scale > 0.0)) {
      throw NumericError(
          "covariance_sandwich: residuals have zero spread; use bootstrap");
    }
    h = hall_sheather_bandwidth(static_cast<std::size_t>(n), fit.tau) * scale;
  }
  if (!(h > 0.0)) {
    throw UsageError("covariance_sandwich: bandwidth must be positive");
  }
  Eigen::VectorXd densities(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    densities[i] = normal_pdf(fit.residuals[i] / h) / h;
  }
  CovarianceEstimate cov =
      covariance_sandwich_with_densities(X, fit.tau, densities);
  cov.bandwidth = h;
  cov.density_at_tau = densities.mean();
  return cov;
}

CovarianceEstimate bootstrap_cov(const Eigen::MatrixXd& X,
                                 const Eigen::VectorXd& y, double tau,
                                 const BootstrapOptions& options) {
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n != y.size()) {
    throw UsageError("bootstrap_cov: X and y row counts differ");
  }
  if (options.replications < 50) {
    throw UsageError("bootstrap_cov: need at least 50 replications");
  }

  // Groups resampled with replacement: whole clusters in first-appearance
  // order, or one singleton group per row. With all-singleton clusters the
  // two coincide exactly.
  std::vector<std::vector<Eigen::Index>> groups;
  if (options.cluster_ids) {
    const auto& ids = *options.cluster_ids;
    if (static_cast<Eigen::Index>(ids.size()) != n) {
      throw UsageError("bootstrap_cov: cluster id length mismatch");
    }
    std::unordered_map<std::string, std::size_t> group_of;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [it, inserted] = group_of.try_emplace(ids[static_cast<std::size_t>(i)],
                                                 groups.size());
      if (inserted) groups.emplace_back();
      groups[it->second].push_back(i);
    }
    if (groups.size() < 10) {
      throw UsageError("bootstrap_cov: need at least 10 distinct clusters, got " +
                       std::to_string(groups.size()));
    }
  } else {
    groups.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      groups[static_cast<std::size_t>(i)].push_back(i);
    }
  }

  const std::size_t b_total = static_cast<std::size_t>(options.replications);
  std::vector<std::optional<Eigen::VectorXd>> betas(b_total);
  parallel_for(b_total, options.threads, [&](std::size_t b) {
    auto rng = replication_rng(options.seed, b);
    std::uniform_int_distribution<std::size_t> pick(0, groups.size() - 1);
    std::vector<Eigen::Index> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (std::size_t g = 0; g < groups.size(); ++g) {
      for (Eigen::Index i : groups[pick(rng)]) rows.push_back(i);
    }
    Eigen::MatrixXd xs(static_cast<Eigen::Index>(rows.size()), k);
    Eigen::VectorXd ys(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      xs.row(static_cast<Eigen::Index>(i)) = X.row(rows[i]);
      ys[static_cast<Eigen::Index>(i)] = y[rows[i]];
    }
    try {
      QuantileFit fit = fit_quantile(xs, ys, tau, options.solver);
      if (fit.status == SolverStatus::converged) {
        betas[b] = std::move(fit.beta);
      }
    } catch (const NumericError&) {
      // dropped and counted below
    }
  });

  int failed = 0;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(k);
  for (const auto& beta : betas) {
    if (beta) {
      mean += *beta;
    } else {
      ++failed;
    }
  }
  if (failed * 10 > options.replications) {
    throw NumericError("bootstrap_cov: " + std::to_string(failed) + " of " +
                       std::to_string(options.replications) +
                       " replications failed (more than 10%)");
  }
  const int ok = options.replications - failed;
  mean /= static_cast<double>(ok);
  Eigen::MatrixXd cov_mat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& beta : betas) {
    if (beta) {
      Eigen::VectorXd d = *beta - mean;
      cov_mat.noalias() += d * d.transpose();
    }
  }
  cov_mat /= static_cast<double>(ok - 1);

  CovarianceEstimate cov;
  cov.method = options.cluster_ids ? CovMethod::cluster_bootstrap
                                   : CovMethod::bootstrap;
  cov.matrix = symmetrized(cov_mat);
  cov.replications = options.replications;
  cov.failed = failed;
  cov.seed = options.seed;
  return cov;
}

ConfidenceBand confidence_band(const std::vector<QuantileFit>& fits,
                               const std::vector<CovarianceEstimate>& covs,
                               double level,
                               const std::vector<std::string>& names) {
  if (fits.size() != covs.size()) {
    throw UsageError("confidence_band: fits and covariances differ in length");
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw UsageError("confidence_band: level must lie in (0,1)");
  }
  const double z = normal_quantile(0.5 * (1.0 + level));
  ConfidenceBand band;
  band.level = level;
  for (std::size_t t = 0; t < fits.size(); ++t) {
    const auto& fit = fits[t];
    const Eigen::VectorXd se = covs[t].std_errors();
    if (se.size() != fit.beta.size()) {
      throw UsageError("confidence_band: coefficient count mismatch at tau=" +
                       std::to_string(fit.tau));
    }
    for (Eigen::Index j = 0; j < fit.beta.size(); ++j) {
      std::string name = j < static_cast<Eigen::Index>(names.size())
                             ? names[static_cast<std::size_t>(j)]
                             : "b" + std::to_string(j);
      band.entries.push_back({fit.tau, std::move(name), fit.beta[j], se[j],
                              fit.beta[j] - z * se[j],
                              fit.beta[j] + z * se[j]});
    }
  }
  return band;
}

}  // namespace qreg

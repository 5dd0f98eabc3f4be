#include <doctest.h>

#include <cmath>
#include <random>

#include "qreg/errors.hpp"
#include "qreg/inference.hpp"
#include "qreg/normal.hpp"
#include "qreg/simulate.hpp"

using namespace qreg;

namespace {

void check_symmetric_psd(const Eigen::MatrixXd& m) {
  CHECK((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-10 * std::max(m.trace(), 1.0));
}

Eigen::MatrixXd design_with_x(const std::vector<double>& x) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(x.size()), 2);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = 1.0;
    X(i, 1) = x[static_cast<std::size_t>(i)];
  }
  return X;
}

}  // namespace

TEST_CASE("density estimate on exact normal quantiles") {
  const int n = 10001;
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) {
    r[i] = normal_quantile((i + 0.5) / n);
  }
  DensityEstimate d = estimate_density(r, 0.5);
  CHECK(d.value == doctest::Approx(normal_pdf(0.0)).epsilon(0.05));
}

TEST_CASE("density estimate on a uniform grid") {
  const int n = 5001;
  Eigen::VectorXd r(n);
  for (int i = 0; i < n; ++i) r[i] = (i + 0.5) / n;
  DensityEstimate d = estimate_density(r, 0.5);
  CHECK(d.value == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("degenerate residual spread is an error") {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(100);
  CHECK_THROWS_WITH_AS(estimate_density(r, 0.5),
                       doctest::Contains("bootstrap"), NumericError);
}

TEST_CASE("iid covariance matches the analytic median variance") {
  const int n = 4000;
  auto rng = std::mt19937_64(2024);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = normal(rng);

  QuantileFit fit = fit_quantile(X, y, 0.5);
  CovarianceEstimate cov = covariance_iid(fit, X);
  const double truth = M_PI / (2.0 * n);
  CHECK(cov.matrix(0, 0) == doctest::Approx(truth).epsilon(0.20));
  check_symmetric_psd(cov.matrix);

  // formula collapse for a K=1 design of ones
  const double f = cov.density_at_tau;
  CHECK(cov.matrix(0, 0) == doctest::Approx(0.25 / (n * f * f)).epsilon(1e-10));

  // doubling y doubles the standard error
  QuantileFit fit2 = fit_quantile(X, 2.0 * y, 0.5);
  CovarianceEstimate cov2 = covariance_iid(fit2, X);
  CHECK(cov2.matrix(0, 0) == doctest::Approx(4.0 * cov.matrix(0, 0)).epsilon(1e-6));
}

TEST_CASE("sandwich agrees with iid under homoskedasticity") {
  LocationScaleDgp dgp;
  dgp.n = 4000;
  dgp.scale_slope = 0.0;
  dgp.seed = 5;
  Dataset ds = gen_location_scale(dgp);
  Eigen::MatrixXd X = design_with_x(ds.column("x").values);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      ds.column("y").values.data(), static_cast<Eigen::Index>(dgp.n));

  QuantileFit fit = fit_quantile(X, y, 0.5);
  CovarianceEstimate iid = covariance_iid(fit, X);
  CovarianceEstimate sand = covariance_sandwich(fit, X);
  check_symmetric_psd(sand.matrix);
  const double se_iid = iid.std_errors()[1];
  const double se_sand = sand.std_errors()[1];
  CHECK(std::fabs(se_sand - se_iid) / se_iid < 0.25);
}

TEST_CASE("sandwich diverges from iid under heteroskedasticity") {
  // y = x * eps: slope-noise grows with x
  const int n = 4000;
  auto rng = std::mt19937_64(77);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.2, 5.0);
  std::vector<double> xs(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = unif(rng);
    y[i] = xs[static_cast<std::size_t>(i)] * normal(rng);
  }
  Eigen::MatrixXd X = design_with_x(xs);
  QuantileFit fit = fit_quantile(X, y, 0.5);
  const double se_iid = covariance_iid(fit, X).std_errors()[1];
  const double se_sand = covariance_sandwich(fit, X).std_errors()[1];
  CHECK(std::fabs(se_sand - se_iid) / se_iid > 0.25);
}

TEST_CASE("sandwich with constant densities reduces to the iid formula") {
  auto rng = std::mt19937_64(31);
  std::normal_distribution<double> normal;
  const int n = 200;
  std::vector<double> xs(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = normal(rng);
    y[i] = normal(rng);
  }
  Eigen::MatrixXd X = design_with_x(xs);
  QuantileFit fit = fit_quantile(X, y, 0.3);
  CovarianceEstimate iid = covariance_iid(fit, X);
  Eigen::VectorXd densities =
      Eigen::VectorXd::Constant(n, iid.density_at_tau);
  CovarianceEstimate sand =
      covariance_sandwich_with_densities(X, 0.3, densities);
  CHECK((sand.matrix - iid.matrix).cwiseAbs().maxCoeff() <=
        1e-10 * iid.matrix.cwiseAbs().maxCoeff());
}

TEST_CASE("J on an orthonormalized design is the identity") {
  auto rng = std::mt19937_64(8);
  std::normal_distribution<double> normal;
  const int n = 300;
  Eigen::MatrixXd raw(n, 2);
  for (int i = 0; i < n; ++i) {
    raw(i, 0) = 1.0;
    raw(i, 1) = normal(rng);
  }
  // orthonormalize so that X'X/N = I
  Eigen::MatrixXd g = raw.transpose() * raw / double(n);
  Eigen::MatrixXd X = raw * g.llt().matrixL().toDenseMatrix().inverse().transpose();
  Eigen::MatrixXd j_mat = X.transpose() * X / double(n);
  CHECK((j_mat - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <=
        1e-10);
}

TEST_CASE("bootstrap determinism and accuracy on the median") {
  const int n = 2000;
  auto rng = std::mt19937_64(404);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = normal(rng);

  BootstrapOptions opts;
  opts.replications = 400;
  opts.seed = 99;
  CovarianceEstimate a = bootstrap_cov(X, y, 0.5, opts);
  CovarianceEstimate b = bootstrap_cov(X, y, 0.5, opts);
  CHECK(a.matrix == b.matrix);  // bit-for-bit
  check_symmetric_psd(a.matrix);

  const double truth = std::sqrt(M_PI / (2.0 * n));
  CHECK(a.std_errors()[0] == doctest::Approx(truth).epsilon(0.25));
}

TEST_CASE("singleton clusters reduce to the plain pairs bootstrap") {
  const int n = 120;
  auto rng = std::mt19937_64(3);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = normal(rng);

  BootstrapOptions plain;
  plain.replications = 100;
  plain.seed = 12;
  CovarianceEstimate unclustered = bootstrap_cov(X, y, 0.5, plain);

  BootstrapOptions clustered = plain;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) ids.push_back("row" + std::to_string(i));
  clustered.cluster_ids = ids;
  CovarianceEstimate with_clusters = bootstrap_cov(X, y, 0.5, clustered);
  CHECK(unclustered.matrix == with_clusters.matrix);
  CHECK(with_clusters.method == CovMethod::cluster_bootstrap);
}

TEST_CASE("bootstrap dispersion tightens as B grows") {
  const int n = 400;
  auto rng = std::mt19937_64(21);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = normal(rng);

  auto se_spread = [&](int b) {
    std::vector<double> ses;
    for (std::uint64_t s = 0; s < 8; ++s) {
      BootstrapOptions opts;
      opts.replications = b;
      opts.seed = s;
      ses.push_back(bootstrap_cov(X, y, 0.5, opts).std_errors()[0]);
    }
    double mean = 0.0;
    for (double v : ses) mean += v;
    mean /= ses.size();
    double var = 0.0;
    for (double v : ses) var += (v - mean) * (v - mean);
    return var;
  };
  CHECK(se_spread(800) < se_spread(100));
}

TEST_CASE("bootstrap input validation") {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(20, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Random(20);
  BootstrapOptions opts;
  opts.replications = 10;
  CHECK_THROWS_AS(bootstrap_cov(X, y, 0.5, opts), UsageError);
  opts.replications = 100;
  opts.cluster_ids = std::vector<std::string>(20, "same");
  CHECK_THROWS_WITH_AS(bootstrap_cov(X, y, 0.5, opts),
                       doctest::Contains("10 distinct clusters"), UsageError);
}

TEST_CASE("confidence bands") {
  QuantileFit fit;
  fit.tau = 0.5;
  fit.beta = Eigen::VectorXd::Zero(1);
  CovarianceEstimate cov;
  cov.matrix = Eigen::MatrixXd::Ones(1, 1);

  ConfidenceBand band = confidence_band({fit}, {cov}, 0.95, {"b0"});
  CHECK(band.entries.size() == 1);
  CHECK(band.entries[0].lower == doctest::Approx(-1.959964).epsilon(1e-3));
  CHECK(band.entries[0].upper == doctest::Approx(1.959964).epsilon(1e-3));

  ConfidenceBand narrow = confidence_band({fit}, {cov}, 0.5, {"b0"});
  CHECK(narrow.entries[0].lower > band.entries[0].lower);
  CHECK(narrow.entries[0].upper < band.entries[0].upper);

  cov.matrix.setZero();
  ConfidenceBand point = confidence_band({fit}, {cov}, 0.95, {"b0"});
  CHECK(point.entries[0].lower == point.entries[0].estimate);
  CHECK(point.entries[0].upper == point.entries[0].estimate);

  CHECK_THROWS_AS(confidence_band({fit, fit}, {cov}, 0.95, {"b0"}),
                  UsageError);
}

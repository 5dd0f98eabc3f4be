#include "qreg/simulate.hpp"

#include <cmath>
#include <string>

#include "qreg/errors.hpp"
#include "qreg/normal.hpp"
#include "qreg/parallel.hpp"
#include "qreg/rng.hpp"

namespace qreg {

namespace {

// Uniform draw strictly inside (0,1); independent of stdlib distribution
// internals so seeded runs are reproducible everywhere.
double next_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

std::string two_digits(int v) {
  return (v < 10 ? "0" : "") + std::to_string(v);
}

}  // namespace

Dataset gen_location_scale(const LocationScaleDgp& dgp) {
  if (dgp.n == 0) {
    throw UsageError("gen_location_scale: n must be positive");
  }
  if (!(dgp.scale_base > 0.0) || !(dgp.scale_base + 2.0 * dgp.scale_slope > 0.0)) {
    throw UsageError(
        "gen_location_scale: scale is nonpositive somewhere on [0,2]");
  }
  auto rng = std::mt19937_64(splitmix64(dgp.seed));
  Column x, y;
  x.values.reserve(dgp.n);
  y.values.reserve(dgp.n);
  for (std::size_t i = 0; i < dgp.n; ++i) {
    const double xi = 2.0 * next_uniform(rng);
    const double eps = normal_quantile(next_uniform(rng));
    x.values.push_back(xi);
    y.values.push_back(dgp.intercept + dgp.slope * xi +
                       (dgp.scale_base + dgp.scale_slope * xi) * eps);
  }
  Dataset ds;
  ds.add_column("x", std::move(x));
  ds.add_column("y", std::move(y));
  return ds;
}

double analytic_slope(const LocationScaleDgp& dgp, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("analytic_slope: tau must lie in (0,1)");
  }
  return dgp.slope + dgp.scale_slope * normal_quantile(tau);
}

double analytic_intercept(const LocationScaleDgp& dgp, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("analytic_intercept: tau must lie in (0,1)");
  }
  return dgp.intercept + dgp.scale_base * normal_quantile(tau);
}

double height_true_coefficient(const HeightPanelDgp& dgp, int term,
                               double tau) {
  if (term < 0 || term > 3) {
    throw UsageError("height_true_coefficient: term must be 0..3");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("height_true_coefficient: tau must lie in (0,1)");
  }
  return dgp.base[static_cast<std::size_t>(term)] +
         dgp.taper[static_cast<std::size_t>(term)] * (1.0 - tau);
}

Dataset gen_height_panel(const HeightPanelDgp& dgp) {
  if (dgp.provinces < 1 || dgp.decades < 1) {
    throw UsageError("gen_height_panel: need at least one province and decade");
  }
  if (dgp.cohort < 1) {
    throw UsageError("gen_height_panel: empty (province, decade) cells");
  }
  if (!(dgp.growth_max >= dgp.growth_min)) {
    throw UsageError("gen_height_panel: growth_max < growth_min");
  }
  if (dgp.sigma > 0.0) {
    // Quantile crossing guard: the comonotone construction below is a valid
    // conditional quantile model only while the noise term dominates the
    // tapered coefficients over the growth support.
    double taper_budget = 0.0;
    for (double t : dgp.taper) taper_budget += std::fabs(t);
    const double g_max =
        std::max(std::fabs(dgp.growth_min), std::fabs(dgp.growth_max));
    if (taper_budget * g_max >= dgp.sigma * 2.5066282746310002) {
      throw UsageError(
          "gen_height_panel: tapered coefficients too steep for sigma; "
          "conditional quantiles would cross");
    }
  }

  auto rng = std::mt19937_64(splitmix64(dgp.seed));
  const std::size_t n = static_cast<std::size_t>(dgp.provinces) *
                        static_cast<std::size_t>(dgp.decades) *
                        static_cast<std::size_t>(dgp.cohort);
  Column height, province, decade;
  std::array<Column, 4> growth;
  height.values.reserve(n);
  province.type = ColumnType::categorical;
  decade.type = ColumnType::categorical;

  for (int p = 0; p < dgp.provinces; ++p) {
    for (int t = 0; t < dgp.decades; ++t) {
      std::array<double, 4> g;
      for (double& ga : g) {
        ga = dgp.growth_min +
             (dgp.growth_max - dgp.growth_min) * next_uniform(rng);
      }
      const double mu = dgp.base_height + dgp.province_step * p;
      const double lambda = dgp.decade_step * t;
      for (int i = 0; i < dgp.cohort; ++i) {
        const double u = next_uniform(rng);
        double h = mu + lambda;
        for (int a = 0; a < 4; ++a) {
          h += (dgp.base[static_cast<std::size_t>(a)] +
                dgp.taper[static_cast<std::size_t>(a)] * (1.0 - u)) *
               g[static_cast<std::size_t>(a)];
        }
        if (dgp.sigma > 0.0) {
          h += dgp.sigma * normal_quantile(u);
        }
        if (!(h > 0.0)) {
          throw NumericError("gen_height_panel: generated nonpositive height");
        }
        height.values.push_back(h);
        for (int a = 0; a < 4; ++a) {
          growth[static_cast<std::size_t>(a)].values.push_back(
              g[static_cast<std::size_t>(a)]);
        }
        province.labels.push_back("p" + two_digits(p + 1));
        decade.labels.push_back("d" + std::to_string(1890 + 10 * t));
      }
    }
  }

  Dataset ds;
  ds.add_column("height", std::move(height));
  ds.add_column("growth0", std::move(growth[0]));
  ds.add_column("growth6", std::move(growth[1]));
  ds.add_column("growth12", std::move(growth[2]));
  ds.add_column("growth18", std::move(growth[3]));
  ds.add_column("province", std::move(province));
  ds.add_column("decade", std::move(decade));
  return ds;
}

McReport mc_study(const McConfig& config) {
  if (config.replications < 50) {
    throw UsageError("mc_study: need at least 50 replications");
  }
  if (config.taus.empty()) {
    throw UsageError("mc_study: empty tau list");
  }
  const std::size_t reps = static_cast<std::size_t>(config.replications);
  const std::size_t n_taus = config.taus.size();

  struct RepResult {
    std::vector<double> slope, lower, upper;
    bool ok = false;
  };
  std::vector<RepResult> results(reps);

  parallel_for(reps, config.threads, [&](std::size_t r) {
    LocationScaleDgp dgp = config.dgp;
    dgp.seed = splitmix64(splitmix64(config.seed) ^ r);
    Dataset ds = gen_location_scale(dgp);
    const auto& xs = ds.column("x").values;
    const auto& ys = ds.column("y").values;
    const Eigen::Index n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      X(i, 0) = 1.0;
      X(i, 1) = xs[static_cast<std::size_t>(i)];
      y[i] = ys[static_cast<std::size_t>(i)];
    }
    RepResult& out = results[r];
    try {
      const double z = normal_quantile(0.5 * (1.0 + config.level));
      for (double tau : config.taus) {
        QuantileFit fit = fit_quantile(X, y, tau);
        if (fit.status != SolverStatus::converged) {
          return;  // counted as failed
        }
        CovarianceEstimate cov =
            config.method == CovMethod::iid ? covariance_iid(fit, X)
                                            : covariance_sandwich(fit, X);
        const double se = cov.std_errors()[1];
        out.slope.push_back(fit.beta[1]);
        out.lower.push_back(fit.beta[1] - z * se);
        out.upper.push_back(fit.beta[1] + z * se);
      }
      out.ok = true;
    } catch (const NumericError&) {
      out.ok = false;
    }
  });

  int failed = 0;
  for (const auto& r : results) {
    if (!r.ok) ++failed;
  }
  if (failed * 10 > config.replications) {
    throw NumericError("mc_study: " + std::to_string(failed) + " of " +
                       std::to_string(config.replications) +
                       " replications failed (more than 10%)");
  }
  const double ok = static_cast<double>(config.replications - failed);

  McReport report;
  report.replications = config.replications;
  report.failed = failed;
  for (std::size_t t = 0; t < n_taus; ++t) {
    const double truth = analytic_slope(config.dgp, config.taus[t]);
    double sum = 0.0, sq = 0.0, covered = 0.0, width = 0.0;
    for (const auto& r : results) {
      if (!r.ok) continue;
      const double err = r.slope[t] - truth;
      sum += err;
      sq += err * err;
      if (r.lower[t] <= truth && truth <= r.upper[t]) covered += 1.0;
      width += r.upper[t] - r.lower[t];
    }
    report.rows.push_back({config.taus[t], truth, sum / ok,
                           std::sqrt(sq / ok), covered / ok, width / ok});
  }
  return report;
}

}  // namespace qreg

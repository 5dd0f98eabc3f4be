#ifndef QREG_SIMULATE_HPP
#define QREG_SIMULATE_HPP

#include <array>
#include <cstdint>
#include <vector>

#include "qreg/dataset.hpp"
#include "qreg/inference.hpp"

namespace qreg {

// y = a + b*x + (s0 + s1*x) * eps, x uniform on [0,2], eps standard normal.
// Conditional quantile slope at tau is b + s1 * Phi^{-1}(tau).
struct LocationScaleDgp {
  std::size_t n = 1000;
  double intercept = 1.0;
  double slope = 1.0;
  double scale_base = 1.0;
  double scale_slope = 0.0;
  std::uint64_t seed = 0;
};

Dataset gen_location_scale(const LocationScaleDgp& dgp);

double analytic_slope(const LocationScaleDgp& dgp, double tau);
double analytic_intercept(const LocationScaleDgp& dgp, double tau);

// Height panel with province/decade fixed effects and four growth-exposure
// regressors whose coefficients vary across the outcome distribution:
// beta_a(tau) = base[a] + taper[a]*(1-tau). A positive taper concentrates
// the effect at the lower quantiles.
struct HeightPanelDgp {
  int provinces = 5;
  int decades = 5;
  int cohort = 80;  // individuals per (province, decade) cell
  std::array<double, 4> base = {0.3, 0.0, 0.5, 0.2};
  std::array<double, 4> taper = {0.0, 3.0, 0.5, 0.0};
  double base_height = 160.0;
  double province_step = 0.8;  // mu_p = base_height + province_step * p
  double decade_step = 0.4;    // lambda_t = decade_step * t
  double sigma = 1.0;
  double growth_min = -0.1;
  double growth_max = 0.5;
  std::uint64_t seed = 0;
};

// Columns: height, growth0, growth6, growth12, growth18 (continuous),
// province, decade (categorical).
Dataset gen_height_panel(const HeightPanelDgp& dgp);

double height_true_coefficient(const HeightPanelDgp& dgp, int term, double tau);

struct McConfig {
  LocationScaleDgp dgp;
  std::vector<double> taus = {0.5};
  int replications = 200;
  std::uint64_t seed = 0;
  double level = 0.95;
  CovMethod method = CovMethod::sandwich;
  int threads = 1;
};

struct McRow {
  double tau;
  double true_slope;
  double bias;
  double rmse;
  double coverage;
  double mean_ci_width;
};

struct McReport {
  std::vector<McRow> rows;
  int replications = 0;
  int failed = 0;
};

// Monte Carlo study of the quantile slope estimator on the location-scale
// DGP, reporting bias, RMSE and CI coverage against the analytic truth.
McReport mc_study(const McConfig& config);

}  // namespace qreg

#endif  // QREG_SIMULATE_HPP

#ifndef QREG_TREATMENT_HPP
#define QREG_TREATMENT_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace qreg {

// Type-1 (inf-based) sample quantile: the smallest observation whose
// empirical CDF value reaches tau.
double empirical_quantile(std::span<const double> sample, double tau);

struct EmpiricalCdf {
  std::vector<double> support;  // sorted, distinct
  std::vector<double> prob;     // one per support point
  bool monotonized = false;
};

struct TreatmentBand {
  double level = 0.95;
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<double> lower;  // per tau
  std::vector<double> upper;
};

struct TreatmentResult {
  std::vector<double> taus;
  std::vector<double> effects;  // q1 - q0, per tau
  std::vector<double> q1;
  std::vector<double> q0;
  std::optional<double> first_stage;  // E(D|Z=1) - E(D|Z=0); LQTE only
  std::optional<TreatmentBand> band;
};

// Unconditional quantile treatment effect: per-group quantile difference.
TreatmentResult qte(std::span<const double> y, std::span<const double> d,
                    const std::vector<double>& taus);

// Wald ratio [E(y|Z=1)-E(y|Z=0)] / [E(D|Z=1)-E(D|Z=0)].
double late_wald(std::span<const double> y, std::span<const double> d,
                 std::span<const double> z);

struct ComplierCdfs {
  EmpiricalCdf raw_treated;
  EmpiricalCdf raw_control;
  EmpiricalCdf treated;  // clamped to [0,1], running-maximum rearranged
  EmpiricalCdf control;
  double first_stage = 0.0;
};

// Abadie complier outcome CDFs evaluated on a grid (default: the sorted
// distinct sample values of y). Raw values may leave [0,1] or decrease;
// they are returned as-is alongside monotonized versions.
ComplierCdfs complier_cdfs(std::span<const double> y,
                           std::span<const double> d,
                           std::span<const double> z,
                           std::optional<std::vector<double>> grid = {});

// Local QTE: quantile difference of the monotonized complier CDFs.
TreatmentResult lqte(std::span<const double> y, std::span<const double> d,
                     std::span<const double> z,
                     const std::vector<double>& taus);

struct TreatmentBootstrapOptions {
  int replications = 200;
  std::uint64_t seed = 0;
  double level = 0.95;
  int threads = 1;
};

// Pairs bootstrap percentile band for qte (z empty) or lqte effects.
TreatmentBand bootstrap_treatment(std::span<const double> y,
                                  std::span<const double> d,
                                  std::span<const double> z,
                                  const std::vector<double>& taus,
                                  const TreatmentBootstrapOptions& options);

}  // namespace qreg

#endif  // QREG_TREATMENT_HPP

#include "qreg/treatment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qreg/errors.hpp"
#include "qreg/parallel.hpp"
#include "qreg/rng.hpp"

namespace qreg {

namespace {

constexpr double kRelevanceTol = 1e-12;

void require_binary(std::span<const double> v, const char* name) {
  for (double x : v) {
    if (x != 0.0 && x != 1.0) {
      throw DataError(std::string(name) + " is not binary (found " +
                      std::to_string(x) + ")");
    }
  }
}

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw UsageError(std::string(what) + ": input lengths differ");
  }
}

void require_taus(const std::vector<double>& taus) {
  if (taus.empty()) {
    throw UsageError("empty tau list");
  }
  for (double tau : taus) {
    if (!(tau > 0.0 && tau < 1.0)) {
      throw UsageError("tau must lie in (0,1), got " + std::to_string(tau));
    }
  }
}

double mean_where(std::span<const double> values, std::span<const double> flag,
                  double flag_value) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (flag[i] == flag_value) {
      total += values[i];
      ++count;
    }
  }
  if (count == 0) {
    throw DataError("empty group (flag=" + std::to_string(flag_value) + ")");
  }
  return total / static_cast<double>(count);
}

double invert_cdf(const EmpiricalCdf& cdf, double tau) {
  for (std::size_t i = 0; i < cdf.support.size(); ++i) {
    if (cdf.prob[i] >= tau - kRelevanceTol) return cdf.support[i];
  }
  throw NumericError("complier CDF plateaus below tau=" + std::to_string(tau) +
                     " (maximum " +
                     std::to_string(cdf.prob.empty() ? 0.0 : cdf.prob.back()) +
                     ")");
}

}  // namespace

double empirical_quantile(std::span<const double> sample, double tau) {
  if (sample.empty()) {
    throw DataError("empirical_quantile: empty sample");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("empirical_quantile: tau must lie in (0,1)");
  }
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::size_t idx = static_cast<std::size_t>(
      std::ceil(tau * static_cast<double>(n) - 1e-12));
  if (idx == 0) idx = 1;
  if (idx > n) idx = n;
  return sorted[idx - 1];
}

TreatmentResult qte(std::span<const double> y, std::span<const double> d,
                    const std::vector<double>& taus) {
  require_same_length(y.size(), d.size(), "qte");
  require_binary(d, "treatment");
  require_taus(taus);
  std::vector<double> treated, control;
  for (std::size_t i = 0; i < y.size(); ++i) {
    (d[i] == 1.0 ? treated : control).push_back(y[i]);
  }
  if (treated.empty() || control.empty()) {
    throw DataError("qte: a treatment group is empty");
  }
  TreatmentResult result;
  result.taus = taus;
  for (double tau : taus) {
    const double q1 = empirical_quantile(treated, tau);
    const double q0 = empirical_quantile(control, tau);
    result.q1.push_back(q1);
    result.q0.push_back(q0);
    result.effects.push_back(q1 - q0);
  }
  return result;
}

double late_wald(std::span<const double> y, std::span<const double> d,
                 std::span<const double> z) {
  require_same_length(y.size(), d.size(), "late_wald");
  require_same_length(y.size(), z.size(), "late_wald");
  require_binary(d, "treatment");
  require_binary(z, "instrument");
  const double first_stage =
      mean_where(d, z, 1.0) - mean_where(d, z, 0.0);
  if (std::fabs(first_stage) <= kRelevanceTol) {
    throw NumericError("late_wald: instrument relevance failure (first stage " +
                       std::to_string(first_stage) + ")");
  }
  const double reduced_form =
      mean_where(y, z, 1.0) - mean_where(y, z, 0.0);
  return reduced_form / first_stage;
}

ComplierCdfs complier_cdfs(std::span<const double> y,
                           std::span<const double> d,
                           std::span<const double> z,
                           std::optional<std::vector<double>> grid) {
  require_same_length(y.size(), d.size(), "complier_cdfs");
  require_same_length(y.size(), z.size(), "complier_cdfs");
  require_binary(d, "treatment");
  require_binary(z, "instrument");

  std::vector<double> support;
  if (grid) {
    support = *grid;
    if (support.empty()) {
      throw UsageError("complier_cdfs: empty evaluation grid");
    }
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    if (support.front() > *lo || support.back() < *hi) {
      throw UsageError("complier_cdfs: grid does not cover the sample range");
    }
  } else {
    support.assign(y.begin(), y.end());
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
  }

  // Per instrument arm: outcomes sorted once, then one sweep over the grid
  // accumulating counts of D and 1-D below each grid point.
  struct Arm {
    std::vector<std::pair<double, double>> sorted_yd;
    double n = 0.0;
  };
  Arm arms[2];
  for (std::size_t i = 0; i < y.size(); ++i) {
    Arm& arm = arms[z[i] == 1.0 ? 1 : 0];
    arm.sorted_yd.emplace_back(y[i], d[i]);
    arm.n += 1.0;
  }
  if (arms[0].n == 0.0 || arms[1].n == 0.0) {
    throw DataError("complier_cdfs: an instrument group is empty");
  }
  for (Arm& arm : arms) {
    std::sort(arm.sorted_yd.begin(), arm.sorted_yd.end());
  }

  const double first_stage = mean_where(d, z, 1.0) - mean_where(d, z, 0.0);
  if (std::fabs(first_stage) <= kRelevanceTol) {
    throw NumericError(
        "complier_cdfs: instrument relevance failure (first stage " +
        std::to_string(first_stage) + ")");
  }

  // cum_d[a][g]: E[1{Y<=grid[g]} D | Z=a]; cum_nd analogous with 1-D.
  std::vector<double> cum_d[2], cum_nd[2];
  for (int a = 0; a < 2; ++a) {
    cum_d[a].resize(support.size());
    cum_nd[a].resize(support.size());
    std::size_t pos = 0;
    double sum_d = 0.0, sum_nd = 0.0;
    for (std::size_t g = 0; g < support.size(); ++g) {
      while (pos < arms[a].sorted_yd.size() &&
             arms[a].sorted_yd[pos].first <= support[g]) {
        sum_d += arms[a].sorted_yd[pos].second;
        sum_nd += 1.0 - arms[a].sorted_yd[pos].second;
        ++pos;
      }
      cum_d[a][g] = sum_d / arms[a].n;
      cum_nd[a][g] = sum_nd / arms[a].n;
    }
  }

  ComplierCdfs out;
  out.first_stage = first_stage;
  out.raw_treated.support = support;
  out.raw_control.support = support;
  out.raw_treated.prob.resize(support.size());
  out.raw_control.prob.resize(support.size());
  for (std::size_t g = 0; g < support.size(); ++g) {
    out.raw_treated.prob[g] = (cum_d[1][g] - cum_d[0][g]) / first_stage;
    out.raw_control.prob[g] = (cum_nd[1][g] - cum_nd[0][g]) / (-first_stage);
  }

  auto monotonize = [](const EmpiricalCdf& raw) {
    EmpiricalCdf mono;
    mono.support = raw.support;
    mono.prob.resize(raw.prob.size());
    mono.monotonized = true;
    double running = 0.0;
    for (std::size_t g = 0; g < raw.prob.size(); ++g) {
      running = std::max(running, std::clamp(raw.prob[g], 0.0, 1.0));
      mono.prob[g] = running;
    }
    return mono;
  };
  out.treated = monotonize(out.raw_treated);
  out.control = monotonize(out.raw_control);
  return out;
}

TreatmentResult lqte(std::span<const double> y, std::span<const double> d,
                     std::span<const double> z,
                     const std::vector<double>& taus) {
  require_taus(taus);
  ComplierCdfs cdfs = complier_cdfs(y, d, z);
  TreatmentResult result;
  result.taus = taus;
  result.first_stage = cdfs.first_stage;
  for (double tau : taus) {
    const double q1 = invert_cdf(cdfs.treated, tau);
    const double q0 = invert_cdf(cdfs.control, tau);
    result.q1.push_back(q1);
    result.q0.push_back(q0);
    result.effects.push_back(q1 - q0);
  }
  return result;
}

TreatmentBand bootstrap_treatment(std::span<const double> y,
                                  std::span<const double> d,
                                  std::span<const double> z,
                                  const std::vector<double>& taus,
                                  const TreatmentBootstrapOptions& options) {
  require_taus(taus);
  require_same_length(y.size(), d.size(), "bootstrap_treatment");
  const bool use_instrument = !z.empty();
  if (use_instrument) {
    require_same_length(y.size(), z.size(), "bootstrap_treatment");
  }
  if (options.replications < 50) {
    throw UsageError("bootstrap_treatment: need at least 50 replications");
  }
  if (!(options.level > 0.0 && options.level < 1.0)) {
    throw UsageError("bootstrap_treatment: level must lie in (0,1)");
  }
  const std::size_t n = y.size();
  const std::size_t b_total = static_cast<std::size_t>(options.replications);
  std::vector<std::optional<std::vector<double>>> effects(b_total);

  parallel_for(b_total, options.threads, [&](std::size_t b) {
    auto rng = replication_rng(options.seed, b);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> ys(n), ds(n), zs(use_instrument ? n : 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = pick(rng);
      ys[i] = y[j];
      ds[i] = d[j];
      if (use_instrument) zs[i] = z[j];
    }
    try {
      TreatmentResult rep = use_instrument ? lqte(ys, ds, zs, taus)
                                           : qte(ys, ds, taus);
      effects[b] = std::move(rep.effects);
    } catch (const DataError&) {
    } catch (const NumericError&) {
    }
  });

  int failed = 0;
  for (const auto& e : effects) {
    if (!e) ++failed;
  }
  if (failed * 10 > options.replications) {
    throw NumericError("bootstrap_treatment: " + std::to_string(failed) +
                       " of " + std::to_string(options.replications) +
                       " replications failed (more than 10%)");
  }

  TreatmentBand band;
  band.level = options.level;
  band.replications = options.replications;
  band.seed = options.seed;
  const double alpha = 1.0 - options.level;
  for (std::size_t t = 0; t < taus.size(); ++t) {
    std::vector<double> draws;
    draws.reserve(b_total);
    for (const auto& e : effects) {
      if (e) draws.push_back((*e)[t]);
    }
    band.lower.push_back(empirical_quantile(draws, 0.5 * alpha));
    band.upper.push_back(empirical_quantile(draws, 1.0 - 0.5 * alpha));
  }
  return band;
}

}  // namespace qreg

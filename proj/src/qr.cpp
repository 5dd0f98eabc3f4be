#include "qreg/qr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qreg/errors.hpp"

namespace qreg {

namespace {

void require_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw UsageError("tau must lie strictly in (0,1), got " +
                     std::to_string(tau));
  }
}

void require_full_rank(const Eigen::MatrixXd& X) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    throw NumericError("design matrix is rank deficient (rank " +
                       std::to_string(qr.rank()) + " of " +
                       std::to_string(X.cols()) + ")");
  }
}

double psi(double r, double tau) { return r < 0.0 ? tau - 1.0 : tau; }

// Greedily picks K full-rank rows, preferring the given ordering.
// Returns row indices, or empty if no nonsingular subset was found.
std::vector<Eigen::Index> pick_basis(const Eigen::MatrixXd& X,
                                     const std::vector<Eigen::Index>& order) {
  const Eigen::Index k_cols = X.cols();
  std::vector<Eigen::Index> basis;
  Eigen::MatrixXd ortho(k_cols, k_cols);  // orthonormal rows of chosen span
  Eigen::Index got = 0;
  for (Eigen::Index idx : order) {
    Eigen::VectorXd v = X.row(idx).transpose();
    const double norm0 = v.norm();
    if (norm0 <= 0.0) continue;
    for (Eigen::Index j = 0; j < got; ++j) {
      v -= ortho.row(j).dot(v) * ortho.row(j).transpose();
    }
    if (v.norm() > 1e-10 * norm0) {
      ortho.row(got) = v.transpose() / v.norm();
      basis.push_back(idx);
      if (++got == k_cols) return basis;
    }
  }
  return {};
}

}  // namespace

double check_loss(std::span<const double> residuals, double tau) {
  require_tau(tau);
  double total = 0.0;
  for (double r : residuals) {
    total += r >= 0.0 ? tau * r : (tau - 1.0) * r;
  }
  return total;
}

double check_loss(const Eigen::VectorXd& residuals, double tau) {
  return check_loss(
      std::span<const double>(residuals.data(),
                              static_cast<std::size_t>(residuals.size())),
      tau);
}

OlsFit fit_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (X.rows() != y.size()) {
    throw UsageError("fit_ols: X and y row counts differ");
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < X.cols()) {
    throw NumericError("fit_ols: design matrix is rank deficient (rank " +
                       std::to_string(qr.rank()) + " of " +
                       std::to_string(X.cols()) + ")");
  }
  OlsFit fit;
  fit.beta = qr.solve(y);
  fit.residuals = y - X * fit.beta;
  fit.ssr = fit.residuals.squaredNorm();
  return fit;
}

QuantileFit fit_quantile(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         double tau, const SolverOptions& options) {
  require_tau(tau);
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n != y.size()) {
    throw UsageError("fit_quantile: X and y row counts differ");
  }
  if (n < k) {
    throw NumericError("fit_quantile: fewer observations (" +
                       std::to_string(n) + ") than parameters (" +
                       std::to_string(k) + ")");
  }
  require_full_rank(X);

  // Warm start: rows with the smallest OLS residuals.
  OlsFit ols = fit_ols(X, y);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) {
                     return std::fabs(ols.residuals[a]) <
                            std::fabs(ols.residuals[b]);
                   });
  std::vector<Eigen::Index> basis = pick_basis(X, order);
  if (basis.empty()) {
    throw NumericError("fit_quantile: no nonsingular observation subset");
  }
  std::sort(basis.begin(), basis.end());

  const long max_iter =
      options.max_iterations > 0 ? options.max_iterations : 100 * n + 1000;
  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  Eigen::MatrixXd xb(k, k);
  Eigen::VectorXd yb(k);
  Eigen::VectorXd beta(k), residuals(n);
  SolverStatus status = SolverStatus::max_iterations;
  double best_objective = std::numeric_limits<double>::infinity();
  long stalled = 0;

  for (long iter = 0; iter < max_iter; ++iter) {
    for (Eigen::Index j = 0; j < k; ++j) {
      xb.row(j) = X.row(basis[static_cast<std::size_t>(j)]);
      yb[j] = y[basis[static_cast<std::size_t>(j)]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(xb);
    beta = lu.solve(yb);
    if (!beta.allFinite()) {
      status = SolverStatus::degenerate;
      break;
    }
    residuals = y - X * beta;
    std::fill(in_basis.begin(), in_basis.end(), 0);
    for (Eigen::Index b : basis) {
      in_basis[static_cast<std::size_t>(b)] = 1;
      residuals[b] = 0.0;
    }
    // Rows that duplicate a basic row keep rounding dust instead of an exact
    // zero; snapping it prevents vanishing pivot steps on tied data.
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::fabs(residuals[i]) <= 1e-11 * (1.0 + std::fabs(y[i]))) {
        residuals[i] = 0.0;
      }
    }

    const double objective = check_loss(residuals, tau);
    if (objective < best_objective - 1e-12 * (1.0 + best_objective)) {
      best_objective = objective;
      stalled = 0;
    } else {
      ++stalled;
    }
    const bool blands_rule = stalled > k + 10;  // anti-cycling fallback

    Eigen::VectorXd v = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!in_basis[static_cast<std::size_t>(i)]) {
        v += psi(residuals[i], tau) * X.row(i).transpose();
      }
    }
    // c_j = (v' X_B^{-1})_j; leaving basic j upward costs (1-tau) - c_j,
    // downward costs tau + c_j. Nonnegative everywhere means optimal.
    Eigen::VectorXd c = lu.transpose().solve(v);

    struct Candidate {
      Eigen::Index leave;
      double sign;
      double g;
    };
    std::vector<Candidate> candidates;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double g_plus = (1.0 - tau) - c[j];
      const double g_minus = tau + c[j];
      if (g_plus < -options.optimality_tol) {
        candidates.push_back({j, 1.0, g_plus});
      }
      if (g_minus < -options.optimality_tol) {
        candidates.push_back({j, -1.0, g_minus});
      }
    }
    if (!blands_rule) {
      std::stable_sort(candidates.begin(), candidates.end(),
                       [](const Candidate& a, const Candidate& b) {
                         return a.g < b.g;
                       });
    }

    // The gradient above prices an exact-zero residual as if it sat on the
    // positive side. That overstates descent along directions that would
    // push a tied observation negative, so re-price zeros per direction and
    // pivot only when the corrected slope is still negative. Residuals move
    // as r_i - t * w_i and the objective's slope increases by |w_i| at each
    // crossed breakpoint; the first observation where the slope turns
    // nonnegative enters the basis.
    bool pivoted = false;
    std::vector<std::pair<double, Eigen::Index>> breaks;
    for (const Candidate& cand : candidates) {
      Eigen::VectorXd delta =
          cand.sign * lu.solve(Eigen::VectorXd::Unit(k, cand.leave));
      Eigen::VectorXd w = X * delta;
      double slope = cand.g;
      breaks.clear();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (in_basis[static_cast<std::size_t>(i)]) continue;
        if (residuals[i] == 0.0) {
          if (w[i] > 0.0) slope += w[i];
          continue;
        }
        if (std::fabs(w[i]) < 1e-12) continue;
        const double t = residuals[i] / w[i];
        if (t > 0.0) breaks.emplace_back(t, i);
      }
      if (slope >= -options.optimality_tol) continue;
      std::sort(breaks.begin(), breaks.end());
      Eigen::Index enter = -1;
      for (const auto& [t, i] : breaks) {
        slope += std::fabs(w[i]);
        if (slope >= 0.0) {
          enter = i;
          break;
        }
      }
      if (enter < 0) {
        throw NumericError("fit_quantile: unbounded descent direction");
      }
      basis[static_cast<std::size_t>(cand.leave)] = enter;
      pivoted = true;
      break;
    }
    if (!pivoted) {
      status = SolverStatus::converged;
      break;
    }
  }

  QuantileFit fit;
  fit.tau = tau;
  fit.beta = beta;
  fit.residuals = y - X * beta;
  for (Eigen::Index b : basis) fit.residuals[b] = 0.0;
  fit.objective = check_loss(fit.residuals, tau);
  fit.status = status;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::fabs(fit.residuals[i]) <=
        options.zero_tol * (1.0 + std::fabs(y[i]))) {
      ++fit.n_zero_residuals;
    }
  }
  if (static_cast<double>(n) * std::min(tau, 1.0 - tau) <
      5.0 * static_cast<double>(k)) {
    fit.warnings.push_back(
        "extreme quantile: n*min(tau,1-tau) < 5K; estimates may be fragile");
  }
  return fit;
}

std::vector<QuantileFit> fit_grid(const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& y,
                                  const std::vector<double>& taus,
                                  const SolverOptions& options) {
  if (taus.empty()) {
    throw UsageError("fit_grid: empty tau list");
  }
  for (std::size_t i = 0; i < taus.size(); ++i) {
    require_tau(taus[i]);
    if (i > 0 && taus[i] <= taus[i - 1]) {
      throw UsageError("fit_grid: tau list must be strictly increasing");
    }
  }
  std::vector<QuantileFit> fits;
  fits.reserve(taus.size());
  for (double tau : taus) {
    try {
      fits.push_back(fit_quantile(X, y, tau, options));
    } catch (const NumericError& e) {
      throw NumericError("fit_grid at tau=" + std::to_string(tau) + ": " +
                         e.what());
    }
  }
  return fits;
}

QuantileFit brute_force_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            double tau) {
  require_tau(tau);
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (n > 14 || k > 3) {
    throw UsageError("brute_force_fit: instance too large (n <= 14, K <= 3)");
  }
  if (n < k) {
    throw NumericError("brute_force_fit: n < K");
  }

  QuantileFit best;
  best.tau = tau;
  best.objective = std::numeric_limits<double>::infinity();
  bool found = false;

  std::vector<Eigen::Index> combo(static_cast<std::size_t>(k));
  std::iota(combo.begin(), combo.end(), Eigen::Index{0});
  Eigen::MatrixXd xb(k, k);
  Eigen::VectorXd yb(k);
  while (true) {
    for (Eigen::Index j = 0; j < k; ++j) {
      xb.row(j) = X.row(combo[static_cast<std::size_t>(j)]);
      yb[j] = y[combo[static_cast<std::size_t>(j)]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(xb);
    lu.setThreshold(1e-10);
    if (lu.rank() == k) {
      Eigen::VectorXd beta = lu.solve(yb);
      Eigen::VectorXd r = y - X * beta;
      for (Eigen::Index j = 0; j < k; ++j) {
        r[combo[static_cast<std::size_t>(j)]] = 0.0;
      }
      const double obj = check_loss(r, tau);
      if (obj < best.objective) {
        best.beta = beta;
        best.residuals = r;
        best.objective = obj;
        found = true;
      }
    }
    // next lexicographic combination
    Eigen::Index pos = k - 1;
    while (pos >= 0 && combo[static_cast<std::size_t>(pos)] == n - k + pos) {
      --pos;
    }
    if (pos < 0) break;
    ++combo[static_cast<std::size_t>(pos)];
    for (Eigen::Index j = pos + 1; j < k; ++j) {
      combo[static_cast<std::size_t>(j)] =
          combo[static_cast<std::size_t>(j - 1)] + 1;
    }
  }
  if (!found) {
    throw NumericError("brute_force_fit: all observation subsets singular");
  }
  best.status = SolverStatus::converged;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::fabs(best.residuals[i]) <= 1e-8 * (1.0 + std::fabs(y[i]))) {
      ++best.n_zero_residuals;
    }
  }
  return best;
}

}  // namespace qreg

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qreg/design.hpp"
#include "qreg/errors.hpp"
#include "qreg/inference.hpp"
#include "qreg/normal.hpp"
#include "qreg/report.hpp"
#include "qreg/simulate.hpp"
#include "qreg/treatment.hpp"

namespace {

using namespace qreg;

// Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric failure.
constexpr int kUsageExit = 2;
constexpr int kDataExit = 3;
constexpr int kNumericExit = 4;

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Accepts "0.1,0.5,0.9" or "lo:hi:step".
std::vector<double> parse_taus(const std::string& text) {
  std::vector<double> taus;
  if (text.find(':') != std::string::npos) {
    double lo, hi, step;
    char c1, c2;
    std::istringstream ss(text);
    if (!(ss >> lo >> c1 >> hi >> c2 >> step) || c1 != ':' || c2 != ':' ||
        !(step > 0.0)) {
      throw UsageError("bad tau range '" + text + "' (expected lo:hi:step)");
    }
    for (int i = 0;; ++i) {
      const double tau = lo + step * i;
      if (tau > hi + 1e-12) break;
      taus.push_back(tau);
    }
  } else {
    for (const auto& item : split_list(text)) {
      try {
        taus.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw UsageError("bad tau value '" + item + "'");
      }
    }
  }
  if (taus.empty()) {
    throw UsageError("empty tau grid '" + text + "'");
  }
  for (std::size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0 && taus[i] < 1.0)) {
      throw UsageError("tau " + std::to_string(taus[i]) +
                       " outside (0,1)");
    }
    if (i > 0 && taus[i] <= taus[i - 1]) {
      throw UsageError("tau grid must be strictly increasing");
    }
  }
  return taus;
}

std::string render(const Table& table, const std::string& format) {
  if (format == "csv") return to_csv(table);
  if (format == "json") return to_json(table);
  throw UsageError("unknown output format '" + format + "'");
}

struct CommonOutput {
  std::string output = "-";
  std::string format = "csv";
  std::string config;  // consumed before parsing; registered for --help only
};

void add_output_flags(CLI::App* cmd, CommonOutput& out) {
  cmd->add_option("--output", out.output, "Output path ('-' for stdout)");
  cmd->add_option("--format", out.format, "Output format: csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--config", out.config,
                  "key=value config file; command-line flags override it");
}

// Expands "--config FILE" into the equivalent command-line options. Keys the
// user already passed explicitly are skipped, so flags win over the file.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::string path;
  std::vector<std::string> rest;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) {
        throw qreg::UsageError("--config requires a file path");
      }
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (path.empty()) return rest;

  std::ifstream in(path);
  if (!in.good()) {
    throw qreg::UsageError("cannot read config file '" + path + "'");
  }
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return std::string();
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  };
  std::vector<std::string> result = rest;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw qreg::UsageError("config line is not key=value: '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw qreg::UsageError("config line has an empty key: '" + line + "'");
    }
    const std::string flag = "--" + key;
    bool given = false;
    for (const std::string& a : rest) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) {
        given = true;
        break;
      }
    }
    if (!given) result.push_back(flag + "=" + value);
  }
  return result;
}

struct FitConfig {
  std::string input;
  std::string response;
  std::string terms;
  std::string fixed_effects;
  bool no_intercept = false;
  std::string taus = "0.05:0.95:0.05";
  std::string method = "sandwich";
  int replications = 200;
  std::uint64_t seed = 0;
  std::string cluster;
  double level = 0.95;
  bool no_ols = false;
  int threads = 1;
  CommonOutput out;
};

int run_fit(const FitConfig& cfg) {
  const auto taus = parse_taus(cfg.taus);
  CovMethod method;
  if (cfg.method == "iid") {
    method = CovMethod::iid;
  } else if (cfg.method == "sandwich") {
    method = CovMethod::sandwich;
  } else if (cfg.method == "bootstrap") {
    method = CovMethod::bootstrap;
  } else if (cfg.method == "cluster-bootstrap") {
    method = CovMethod::cluster_bootstrap;
  } else {
    throw UsageError("unknown inference method '" + cfg.method + "'");
  }
  if (method == CovMethod::cluster_bootstrap && cfg.cluster.empty()) {
    throw UsageError("cluster-bootstrap needs --cluster");
  }

  std::vector<ColumnSpec> schema = {{cfg.response, ColumnType::continuous}};
  DesignSpec spec;
  spec.response = cfg.response;
  spec.intercept = !cfg.no_intercept;
  for (const auto& term : split_list(cfg.terms)) {
    schema.push_back({term, ColumnType::continuous});
    spec.continuous.push_back(term);
  }
  for (const auto& term : split_list(cfg.fixed_effects)) {
    schema.push_back({term, ColumnType::categorical});
    spec.categorical.push_back(term);
  }
  if (!cfg.cluster.empty()) {
    schema.push_back({cfg.cluster, ColumnType::categorical});
  }

  Dataset ds = load_dataset(cfg.input, schema);
  DesignResult built = build_design(ds, spec);
  const auto& X = built.design.values;
  const auto& y = built.response;
  const auto& names = built.design.column_names;

  std::vector<QuantileFit> fits = fit_grid(X, y, taus);
  std::vector<CovarianceEstimate> covs;
  covs.reserve(fits.size());
  for (const auto& fit : fits) {
    switch (method) {
      case CovMethod::iid:
        covs.push_back(covariance_iid(fit, X));
        break;
      case CovMethod::sandwich:
        covs.push_back(covariance_sandwich(fit, X));
        break;
      case CovMethod::bootstrap:
      case CovMethod::cluster_bootstrap: {
        BootstrapOptions opts;
        opts.replications = cfg.replications;
        opts.seed = cfg.seed;
        opts.threads = cfg.threads;
        if (method == CovMethod::cluster_bootstrap) {
          std::vector<std::string> ids;
          const Column& col = ds.column(cfg.cluster);
          ids.reserve(built.kept_rows.size());
          for (std::size_t row : built.kept_rows) {
            ids.push_back(col.labels[row]);
          }
          opts.cluster_ids = std::move(ids);
        }
        covs.push_back(bootstrap_cov(X, y, fit.tau, opts));
        break;
      }
    }
  }
  ConfidenceBand band = confidence_band(fits, covs, cfg.level, names);

  Table table;
  table.columns = {"tau",      "coefficient_name", "estimate", "std_error",
                   "ci_lower", "ci_upper",         "method"};
  for (const auto& e : band.entries) {
    table.add_row({e.tau, e.coefficient, e.estimate, e.std_error, e.lower,
                   e.upper, cov_method_name(method)});
  }
  if (!cfg.no_ols) {
    OlsFit ols = fit_ols(X, y);
    const double dof = static_cast<double>(X.rows() - X.cols());
    const double sigma2 = dof > 0.0 ? ols.ssr / dof : 0.0;
    Eigen::MatrixXd cov =
        sigma2 * (X.transpose() * X)
                     .ldlt()
                     .solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    const double z = normal_quantile(0.5 * (1.0 + cfg.level));
    for (Eigen::Index j = 0; j < ols.beta.size(); ++j) {
      const double se = std::sqrt(std::max(cov(j, j), 0.0));
      table.add_row({std::string("mean"), names[static_cast<std::size_t>(j)],
                     ols.beta[j], se, ols.beta[j] - z * se,
                     ols.beta[j] + z * se, std::string("ols")});
    }
  }
  write_output(cfg.out.output, render(table, cfg.out.format));
  return 0;
}

struct EffectConfig {
  std::string input;
  std::string outcome;
  std::string treatment;
  std::string instrument;  // lqte only
  std::string taus = "0.05:0.95:0.05";
  int replications = 200;
  std::uint64_t seed = 0;
  double level = 0.95;
  bool no_band = false;
  int threads = 1;
  CommonOutput out;
};

int run_effect(const EffectConfig& cfg, bool local) {
  const auto taus = parse_taus(cfg.taus);
  std::vector<ColumnSpec> schema = {{cfg.outcome, ColumnType::continuous},
                                    {cfg.treatment, ColumnType::binary}};
  if (local && cfg.instrument != cfg.treatment) {
    schema.push_back({cfg.instrument, ColumnType::binary});
  }
  Dataset ds = load_dataset(cfg.input, schema);

  // Listwise deletion over the used columns.
  std::vector<double> y, d, z;
  for (std::size_t i = 0; i < ds.n_rows(); ++i) {
    bool complete = true;
    for (const auto& col : schema) {
      if (ds.column(col.name).missing[i]) complete = false;
    }
    if (!complete) continue;
    y.push_back(ds.column(cfg.outcome).values[i]);
    d.push_back(ds.column(cfg.treatment).values[i]);
    if (local) z.push_back(ds.column(cfg.instrument).values[i]);
  }
  if (y.empty()) {
    throw DataError("no complete rows in '" + cfg.input + "'");
  }

  TreatmentResult result = local ? lqte(y, d, z, taus) : qte(y, d, taus);
  std::optional<TreatmentBand> band;
  if (!cfg.no_band) {
    TreatmentBootstrapOptions opts;
    opts.replications = cfg.replications;
    opts.seed = cfg.seed;
    opts.level = cfg.level;
    opts.threads = cfg.threads;
    band = bootstrap_treatment(y, d, local ? std::span<const double>(z)
                                           : std::span<const double>(),
                               taus, opts);
  }

  Table table;
  table.columns = {"tau", "effect", "q1", "q0", "ci_lower", "ci_upper"};
  if (local) table.columns.push_back("first_stage");
  for (std::size_t t = 0; t < taus.size(); ++t) {
    std::vector<Cell> row = {taus[t], result.effects[t], result.q1[t],
                             result.q0[t]};
    if (band) {
      row.push_back(band->lower[t]);
      row.push_back(band->upper[t]);
    } else {
      row.emplace_back(std::string("NA"));
      row.emplace_back(std::string("NA"));
    }
    if (local) row.push_back(*result.first_stage);
    table.add_row(std::move(row));
  }
  write_output(cfg.out.output, render(table, cfg.out.format));
  return 0;
}

struct SimulateConfig {
  std::size_t n = 1000;
  double intercept = 1.0;
  double slope = 1.0;
  double scale_base = 1.0;
  double scale_slope = 0.5;
  std::string taus = "0.25,0.5,0.75";
  int replications = 200;
  std::uint64_t seed = 0;
  std::string method = "sandwich";
  double level = 0.95;
  int threads = 1;
  CommonOutput out;
};

int run_simulate(const SimulateConfig& cfg) {
  McConfig mc;
  mc.dgp.n = cfg.n;
  mc.dgp.intercept = cfg.intercept;
  mc.dgp.slope = cfg.slope;
  mc.dgp.scale_base = cfg.scale_base;
  mc.dgp.scale_slope = cfg.scale_slope;
  mc.taus = parse_taus(cfg.taus);
  mc.replications = cfg.replications;
  mc.seed = cfg.seed;
  mc.level = cfg.level;
  mc.threads = cfg.threads;
  if (cfg.method == "iid") {
    mc.method = CovMethod::iid;
  } else if (cfg.method == "sandwich") {
    mc.method = CovMethod::sandwich;
  } else {
    throw UsageError("simulate supports methods iid and sandwich");
  }
  McReport report = mc_study(mc);

  Table table;
  table.columns = {"tau",      "true_slope",   "bias",
                   "rmse",     "coverage",     "mean_ci_width"};
  for (const auto& row : report.rows) {
    table.add_row({row.tau, row.true_slope, row.bias, row.rmse, row.coverage,
                   row.mean_ci_width});
  }
  write_output(cfg.out.output, render(table, cfg.out.format));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile regression and quantile treatment effect toolkit"};
  app.require_subcommand(1);

  FitConfig fit_cfg;
  CLI::App* fit = app.add_subcommand(
      "fit", "Quantile regression over a tau grid with inference");
  fit->add_option("--input", fit_cfg.input, "Input CSV path")->required();
  fit->add_option("--response", fit_cfg.response, "Response column")
      ->required();
  fit->add_option("--terms", fit_cfg.terms,
                  "Comma-separated continuous regressors");
  fit->add_option("--fe", fit_cfg.fixed_effects,
                  "Comma-separated categorical fixed effects");
  fit->add_flag("--no-intercept", fit_cfg.no_intercept, "Drop the intercept");
  fit->add_option("--taus", fit_cfg.taus, "Tau list or lo:hi:step range");
  fit->add_option("--method", fit_cfg.method,
                  "iid, sandwich, bootstrap or cluster-bootstrap");
  fit->add_option("--B", fit_cfg.replications, "Bootstrap replications");
  fit->add_option("--seed", fit_cfg.seed, "Resampling seed");
  fit->add_option("--cluster", fit_cfg.cluster,
                  "Cluster column for cluster-bootstrap");
  fit->add_option("--level", fit_cfg.level, "Confidence level");
  fit->add_flag("--no-ols", fit_cfg.no_ols, "Skip the OLS comparison block");
  fit->add_option("--threads", fit_cfg.threads, "Worker threads");
  add_output_flags(fit, fit_cfg.out);

  EffectConfig qte_cfg;
  CLI::App* qte_cmd = app.add_subcommand(
      "qte", "Unconditional quantile treatment effects");
  EffectConfig lqte_cfg;
  CLI::App* lqte_cmd = app.add_subcommand(
      "lqte", "Instrument-based local quantile treatment effects");
  for (auto [cmd, cfg] : {std::pair{qte_cmd, &qte_cfg},
                          std::pair{lqte_cmd, &lqte_cfg}}) {
    cmd->add_option("--input", cfg->input, "Input CSV path")->required();
    cmd->add_option("--outcome", cfg->outcome, "Outcome column")->required();
    cmd->add_option("--treatment", cfg->treatment, "Binary treatment column")
        ->required();
    cmd->add_option("--taus", cfg->taus, "Tau list or lo:hi:step range");
    cmd->add_option("--B", cfg->replications, "Bootstrap replications");
    cmd->add_option("--seed", cfg->seed, "Resampling seed");
    cmd->add_option("--level", cfg->level, "Confidence level");
    cmd->add_flag("--no-band", cfg->no_band, "Skip the bootstrap band");
    cmd->add_option("--threads", cfg->threads, "Worker threads");
    add_output_flags(cmd, cfg->out);
  }
  lqte_cmd->add_option("--instrument", lqte_cfg.instrument,
                       "Binary instrument column")
      ->required();

  SimulateConfig sim_cfg;
  CLI::App* sim = app.add_subcommand(
      "simulate", "Monte Carlo study on the location-scale generator");
  sim->add_option("--n", sim_cfg.n, "Sample size per replication");
  sim->add_option("--a", sim_cfg.intercept, "True intercept");
  sim->add_option("--b", sim_cfg.slope, "True slope");
  sim->add_option("--s0", sim_cfg.scale_base, "Scale base");
  sim->add_option("--s1", sim_cfg.scale_slope, "Scale slope");
  sim->add_option("--taus", sim_cfg.taus, "Tau list or lo:hi:step range");
  sim->add_option("--reps", sim_cfg.replications, "Monte Carlo replications");
  sim->add_option("--seed", sim_cfg.seed, "Simulation seed");
  sim->add_option("--method", sim_cfg.method, "CI method: iid or sandwich");
  sim->add_option("--level", sim_cfg.level, "Confidence level");
  sim->add_option("--threads", sim_cfg.threads, "Worker threads");
  add_output_flags(sim, sim_cfg.out);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty()) {
      std::vector<std::string> tail(args.begin() + 1, args.end());
      tail = expand_config(tail);
      args.assign(args.begin(), args.begin() + 1);
      args.insert(args.end(), tail.begin(), tail.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const qreg::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageExit;
  }

  try {
    if (fit->parsed()) return run_fit(fit_cfg);
    if (qte_cmd->parsed()) return run_effect(qte_cfg, false);
    if (lqte_cmd->parsed()) return run_effect(lqte_cfg, true);
    if (sim->parsed()) return run_simulate(sim_cfg);
  } catch (const qreg::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageExit;
  } catch (const qreg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kDataExit;
  } catch (const qreg::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumericExit;
  }
  return kUsageExit;
}

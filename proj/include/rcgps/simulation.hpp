#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rcgps/calibration.hpp"
#include "rcgps/detail/least_squares.hpp"
#include "rcgps/detail/parallel.hpp"
#include "rcgps/errors.hpp"
#include "rcgps/estimators.hpp"
#include "rcgps/gps.hpp"
#include "rcgps/outcome.hpp"
#include "rcgps/rng.hpp"
#include "rcgps/tabular.hpp"

namespace rcgps {

// Knobs of the simulation study's data-generating mechanism. Defaults are
// the study's baseline: moderate exposure confounding, corr(X, W) = 0.85,
// unit residual variance for the calibration model, a linear calibration
// structure, and a large treatment effect with moderate outcome confounding.
//
// The W and Y noise scales are not part of the published parameter table;
// w_noise_sd below is calibrated so that corr(X, W) = 0.85 under the default
// tau / gamma settings, and y_noise_sd is a documented choice.
struct ScenarioConfig {
  std::array<double, 7> tau = {0.8, 0.8, 1.6, 1.2, 2.4, 1.6, 2.4};  // intercept, C1..C6
  double gamma1 = 0.8;
  std::array<double, 3> gamma2 = {2.0, 1.0, 3.0};
  double gamma3 = 0.0;          // quadratic term; 0 keeps the model linear
  double rc_noise_sd = 1.0;     // sqrt(diag Sigma_{X|W,D})
  double beta1 = 1.0;           // outcome slope on the true exposure
  std::array<double, 6> beta2 = {3.0, 2.0, 1.0, 4.0, 2.0, 1.0};
  double y_noise_sd = 10.0;
  double w_noise_sd = 18.1;  // gives corr(X, W) ~= 0.855 at the defaults
  std::size_t n_main = 2000;
  std::size_t n_validation = 500;
  std::vector<double> cutoffs = {-5.0, 15.0};
  std::size_t replicates = 1000;
  std::uint64_t seed = 20200115;

  void validate() const {
    if (n_main == 0 || n_validation == 0)
      throw data_error("scenario: sample sizes must be positive");
    if (n_validation > n_main)
      throw data_error("scenario: internal validation cannot exceed the main study");
    if (rc_noise_sd < 0 || w_noise_sd < 0 || y_noise_sd < 0)
      throw data_error("scenario: noise scales must be nonnegative");
    if (cutoffs.empty()) throw data_error("scenario: cutoffs must be non-empty");
    CutoffSpec check(cutoffs);  // validates monotonicity
  }
};

struct ScenarioData {
  TabularDataset main;        // Y, W, D1..D3, C1..C6, and the latent X
  TabularDataset validation;  // first n_validation rows, X observed
};

namespace detail {

// Cholesky factor of the C1..C3 covariance ((2,1,-1),(1,1,-.5),(-1,-.5,1)).
inline const Eigen::Matrix3d& confounder_chol() {
  static const Eigen::Matrix3d chol = [] {
    Eigen::Matrix3d sigma;
    sigma << 2.0, 1.0, -1.0, 1.0, 1.0, -0.5, -1.0, -0.5, 1.0;
    return Eigen::Matrix3d(sigma.llt().matrixL());
  }();
  return chol;
}

}  // namespace detail

// One draw of the simulation design:
//   C1..C3 trivariate normal, C4 uniform on {-2..2}, C5 ~ U(-3,3), C6 ~ chi^2(1),
//   D1 = C1, D2 ~ N(0, 4), D3 ~ U(-5,5),
//   W = tau0 + tau' C + e_w,   X = gamma1 W + gamma2' D + gamma3 W^2 + e_x,
//   Y = beta1 X + beta2' C + e_y.
// The validation study is the first n_validation rows (rows are i.i.d., so
// this is distributionally a random subset and keeps replays reproducible).
inline ScenarioData generate_scenario(const ScenarioConfig& cfg,
                                      std::uint64_t seed) {
  cfg.validate();
  RngStream rng(seed);
  const std::size_t n = cfg.n_main;

  std::vector<double> c1(n), c2(n), c3(n), c4(n), c5(n), c6(n);
  std::vector<double> d2(n), d3(n), w(n), x(n), y(n);
  const Eigen::Matrix3d& chol = detail::confounder_chol();

  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
    const Eigen::Vector3d c_normal = chol * z;
    c1[i] = c_normal[0];
    c2[i] = c_normal[1];
    c3[i] = c_normal[2];
    c4[i] = static_cast<double>(rng.uniform_int(-2, 2));
    c5[i] = rng.uniform(-3.0, 3.0);
    c6[i] = rng.chisq1();
    d2[i] = rng.normal(0.0, 2.0);  // N(0, variance 4)
    d3[i] = rng.uniform(-5.0, 5.0);

    w[i] = cfg.tau[0] + cfg.tau[1] * c1[i] + cfg.tau[2] * c2[i] +
           cfg.tau[3] * c3[i] + cfg.tau[4] * c4[i] + cfg.tau[5] * c5[i] +
           cfg.tau[6] * c6[i] + rng.normal(0.0, cfg.w_noise_sd);
    x[i] = cfg.gamma1 * w[i] + cfg.gamma2[0] * c1[i] + cfg.gamma2[1] * d2[i] +
           cfg.gamma2[2] * d3[i] + cfg.gamma3 * w[i] * w[i] +
           rng.normal(0.0, cfg.rc_noise_sd);
    y[i] = cfg.beta1 * x[i] + cfg.beta2[0] * c1[i] + cfg.beta2[1] * c2[i] +
           cfg.beta2[2] * c3[i] + cfg.beta2[3] * c4[i] + cfg.beta2[4] * c5[i] +
           cfg.beta2[5] * c6[i] + rng.normal(0.0, cfg.y_noise_sd);
  }

  ScenarioData data;
  data.main.add_column("y", std::move(y), ColumnRole::outcome);
  data.main.add_column("x", std::move(x), ColumnRole::true_exposure);
  data.main.add_column("w", std::move(w), ColumnRole::error_prone_exposure);
  data.main.add_column("d1", c1, ColumnRole::calibration_covariate);
  data.main.add_column("d2", std::move(d2), ColumnRole::calibration_covariate);
  data.main.add_column("d3", std::move(d3), ColumnRole::calibration_covariate);
  data.main.add_column("c1", std::move(c1), ColumnRole::confounder);
  data.main.add_column("c2", std::move(c2), ColumnRole::confounder);
  data.main.add_column("c3", std::move(c3), ColumnRole::confounder);
  data.main.add_column("c4", std::move(c4), ColumnRole::confounder);
  data.main.add_column("c5", std::move(c5), ColumnRole::confounder);
  data.main.add_column("c6", std::move(c6), ColumnRole::confounder);
  data.validation = data.main.head(cfg.n_validation);
  return data;
}

// Large-sample reference ATE: generate rows with the true exposure,
// categorize it, and fit Y ~ 1 + I(cat 2) + I(cat 3) + C by least squares.
// Returns the adjacent contrasts (ATE(2;1), ATE(3;2)). Accumulates the
// normal equations in blocks so the 10^6-row default stays cheap.
inline std::pair<double, double> oracle_ate(const ScenarioConfig& cfg,
                                            std::size_t n_rows = 1000000,
                                            std::uint64_t seed = 42) {
  cfg.validate();
  const CutoffSpec cutoffs(cfg.cutoffs);
  const int n_cat = cutoffs.n_categories();
  const std::size_t p =
      1 + static_cast<std::size_t>(n_cat - 1) + 6;  // intercept, cats, C1..C6

  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xty = Eigen::VectorXd::Zero(p);
  std::vector<std::size_t> category_counts(static_cast<std::size_t>(n_cat), 0);

  const std::size_t block_size = 100000;
  ScenarioConfig block_cfg = cfg;
  std::size_t produced = 0;
  std::uint64_t block_index = 0;
  while (produced < n_rows) {
    block_cfg.n_main = std::min(block_size, n_rows - produced);
    block_cfg.n_validation = 1;
    const ScenarioData data =
        generate_scenario(block_cfg, RngStream(seed, 7, block_index).next_u64());
    ++block_index;
    produced += block_cfg.n_main;

    const auto& x = data.main.column("x");
    const auto& y = data.main.column("y");
    const std::vector<int> xc = categorize(x, cutoffs);
    Eigen::VectorXd row(p);
    for (std::size_t i = 0; i < block_cfg.n_main; ++i) {
      row.setZero();
      row[0] = 1.0;
      ++category_counts[static_cast<std::size_t>(xc[i] - 1)];
      if (xc[i] >= 2) row[xc[i] - 1] = 1.0;
      row[static_cast<Eigen::Index>(n_cat) + 0] = data.main.column("c1")[i];
      row[static_cast<Eigen::Index>(n_cat) + 1] = data.main.column("c2")[i];
      row[static_cast<Eigen::Index>(n_cat) + 2] = data.main.column("c3")[i];
      row[static_cast<Eigen::Index>(n_cat) + 3] = data.main.column("c4")[i];
      row[static_cast<Eigen::Index>(n_cat) + 4] = data.main.column("c5")[i];
      row[static_cast<Eigen::Index>(n_cat) + 5] = data.main.column("c6")[i];
      xtx.selfadjointView<Eigen::Lower>().rankUpdate(row);
      xty += y[i] * row;
    }
  }
  for (int c = 0; c < n_cat; ++c)
    if (category_counts[static_cast<std::size_t>(c)] == 0)
      throw data_error("oracle ATE: category " + std::to_string(c + 1) +
                       " is empty at oracle scale; revisit the cutoffs");

  xtx = xtx.selfadjointView<Eigen::Lower>();
  const Eigen::VectorXd beta = xtx.ldlt().solve(xty);
  if (!beta.allFinite())
    throw convergence_error("oracle ATE: singular normal equations");
  if (n_cat < 3) return {beta[1], std::numeric_limits<double>::quiet_NaN()};
  return {beta[1], beta[2] - beta[1]};
}

// Which exposure enters the GPS stage of a replicate.
enum class RcSpec { error_free, error_prone, rc_no_covariates, rc_with_covariates };

inline const char* rc_spec_name(RcSpec spec) {
  switch (spec) {
    case RcSpec::error_free: return "error_free";
    case RcSpec::error_prone: return "error_prone";
    case RcSpec::rc_no_covariates: return "rc_no_covariates";
    case RcSpec::rc_with_covariates: return "rc_with_covariates";
  }
  return "unknown";
}

struct ReplicateOptions {
  int n_subclasses = 10;
  double weight_cap = 10.0;
  TrimStrategy trim = TrimStrategy::none;
  // Transportability perturbation: when set, gamma1 is redrawn per replicate
  // with this extra standard deviation (applies to the RC arms only).
  std::optional<double> perturb_delta_sd;
};

struct ReplicateSummary {
  EstimatorMethod method = EstimatorMethod::subclassification;
  RcSpec rc_spec = RcSpec::error_free;
  std::size_t replicates_run = 0;
  std::size_t replicates_failed = 0;
  // Index 0: contrast 2 vs 1; index 1: contrast 3 vs 2.
  std::array<double, 2> oracle{};
  std::array<double, 2> mean_estimate{};
  std::array<double, 2> bias{};
  std::array<double, 2> percent_bias{};
  std::array<double, 2> empirical_sd{};
  std::array<double, 2> mc_standard_error{};
  std::array<std::vector<double>, 2> estimates;  // raw per-replicate draws
};

// The per-replicate analysis: build the exposure per rc_spec, fit the GPS,
// optionally trim, run the estimator, and return the two adjacent contrasts.
inline std::array<double, 2> replicate_contrasts(const ScenarioData& data,
                                                 const ScenarioConfig& cfg,
                                                 EstimatorMethod method,
                                                 RcSpec rc_spec,
                                                 const ReplicateOptions& options,
                                                 std::uint64_t perturb_seed) {
  const CutoffSpec cutoffs(cfg.cutoffs);
  std::vector<double> exposure;
  switch (rc_spec) {
    case RcSpec::error_free:
      exposure = data.main.column("x");
      break;
    case RcSpec::error_prone:
      exposure = data.main.column("w");
      break;
    case RcSpec::rc_no_covariates: {
      TabularDataset validation = data.validation;
      for (const auto& name : validation.columns_with_role(ColumnRole::calibration_covariate))
        validation.set_role(name, ColumnRole::none);
      RcModel model = fit_rc(validation);
      if (options.perturb_delta_sd)
        model = perturb_gamma1(model, *options.perturb_delta_sd, perturb_seed);
      exposure = predict_xhat(model, data.main);
      break;
    }
    case RcSpec::rc_with_covariates: {
      RcModel model = fit_rc(data.validation);
      if (options.perturb_delta_sd)
        model = perturb_gamma1(model, *options.perturb_delta_sd, perturb_seed);
      exposure = predict_xhat(model, data.main);
      break;
    }
  }
  std::vector<int> xc = categorize(exposure, cutoffs);

  const auto confounder_names = data.main.columns_with_role(ColumnRole::confounder);
  Eigen::MatrixXd confounders(data.main.n_rows(), confounder_names.size());
  for (std::size_t j = 0; j < confounder_names.size(); ++j) {
    const auto& col = data.main.column(confounder_names[j]);
    for (std::size_t i = 0; i < col.size(); ++i)
      confounders(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }

  const GpsModel gps_model = fit_multinomial(xc, confounders);
  GpsMatrix gps = predict_gps(gps_model, confounders);

  std::vector<double> y = data.main.column("y");
  if (options.trim != TrimStrategy::none) {
    TrimmedData trimmed = trim_overlap(data.main, gps, xc, options.trim);
    y = trimmed.dataset.column("y");
    gps = std::move(trimmed.gps);
    xc = std::move(trimmed.xc);
  }

  PotentialOutcomeEstimates estimates;
  switch (method) {
    case EstimatorMethod::subclassification:
      estimates = estimate_subclassification(y, xc, gps, options.n_subclasses);
      break;
    case EstimatorMethod::iptw:
      estimates = estimate_iptw(y, xc, gps, {.weight_cap = options.weight_cap});
      break;
    case EstimatorMethod::matching:
      estimates = estimate_matching(y, xc, gps).first;
      break;
  }
  return {ate_contrast(estimates, 2, 1, ContrastScale::difference),
          ate_contrast(estimates, 3, 2, ContrastScale::difference)};
}

// Monte Carlo replication: R independent draws of the scenario, analyzed
// under rc_spec with the chosen estimator, summarized against the oracle.
// Replicate r uses the counter-derived stream (seed, r), so results are
// independent of the parallel schedule.
inline ReplicateSummary run_replicates(const ScenarioConfig& cfg,
                                       EstimatorMethod method, RcSpec rc_spec,
                                       std::size_t n_replicates,
                                       const std::array<double, 2>& oracle,
                                       const ReplicateOptions& options = {}) {
  cfg.validate();
  if (n_replicates < 1) throw data_error("run_replicates: need R >= 1");

  std::vector<std::optional<std::array<double, 2>>> results(n_replicates);
  std::vector<std::string> failures(n_replicates);
  detail::parallel_for(n_replicates, [&](std::size_t r) {
    const std::uint64_t data_seed = RngStream(cfg.seed, r, 11).next_u64();
    const std::uint64_t perturb_seed = RngStream(cfg.seed, r, 13).next_u64();
    try {
      const ScenarioData data = generate_scenario(cfg, data_seed);
      results[r] =
          replicate_contrasts(data, cfg, method, rc_spec, options, perturb_seed);
    } catch (const error& e) {
      failures[r] = e.what();
    }
  });

  ReplicateSummary summary;
  summary.method = method;
  summary.rc_spec = rc_spec;
  summary.oracle = oracle;
  for (std::size_t r = 0; r < n_replicates; ++r) {
    if (results[r]) {
      for (std::size_t k = 0; k < 2; ++k)
        summary.estimates[k].push_back((*results[r])[k]);
      ++summary.replicates_run;
    } else {
      ++summary.replicates_failed;
    }
  }
  if (summary.replicates_failed * 10 > n_replicates) {
    std::string first_failure;
    for (const auto& f : failures)
      if (!f.empty()) {
        first_failure = f;
        break;
      }
    throw data_error("run_replicates: more than 10% of replicates failed (" +
                     std::to_string(summary.replicates_failed) + " of " +
                     std::to_string(n_replicates) + "; first: " + first_failure +
                     ")");
  }

  for (std::size_t k = 0; k < 2; ++k) {
    const auto& draws = summary.estimates[k];
    double mean = 0.0;
    for (const double v : draws) mean += v;
    mean /= static_cast<double>(draws.size());
    double ss = 0.0;
    for (const double v : draws) ss += (v - mean) * (v - mean);
    const double sd = draws.size() > 1
                          ? std::sqrt(ss / static_cast<double>(draws.size() - 1))
                          : 0.0;
    summary.mean_estimate[k] = mean;
    summary.bias[k] = mean - oracle[k];
    summary.percent_bias[k] = 100.0 * summary.bias[k] / oracle[k];
    summary.empirical_sd[k] = sd;
    summary.mc_standard_error[k] =
        sd / std::sqrt(static_cast<double>(draws.size()));
  }
  return summary;
}

}  // namespace rcgps

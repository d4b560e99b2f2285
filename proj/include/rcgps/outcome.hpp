#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rcgps/detail/least_squares.hpp"
#include "rcgps/errors.hpp"
#include "rcgps/estimators.hpp"
#include "rcgps/rng.hpp"
#include "rcgps/tabular.hpp"

namespace rcgps {

enum class ContrastScale { difference, ratio };

inline const char* scale_name(ContrastScale s) {
  return s == ContrastScale::difference ? "difference" : "ratio";
}

struct AteRow {
  int x = 0;        // baseline category
  int x_prime = 0;  // comparison category
  ContrastScale scale = ContrastScale::difference;
  double estimate = 0.0;
  double se = std::numeric_limits<double>::quiet_NaN();
  double ci_lower = std::numeric_limits<double>::quiet_NaN();
  double ci_upper = std::numeric_limits<double>::quiet_NaN();
  std::string method;
};

struct AteTable {
  std::vector<AteRow> rows;

  const AteRow& find(int x_prime, int x, ContrastScale scale) const {
    for (const auto& row : rows)
      if (row.x_prime == x_prime && row.x == x && row.scale == scale) return row;
    throw data_error("ATE table has no contrast " + std::to_string(x_prime) +
                     " vs " + std::to_string(x));
  }
};

// Single pairwise contrast of mean potential outcomes.
inline double ate_contrast(const PotentialOutcomeEstimates& est, int x_prime,
                           int x, ContrastScale scale) {
  const auto n = static_cast<int>(est.means.size());
  if (x < 1 || x > n || x_prime < 1 || x_prime > n)
    throw data_error("contrast categories out of range");
  const double numer = est.means[static_cast<std::size_t>(x_prime - 1)];
  const double denom = est.means[static_cast<std::size_t>(x - 1)];
  if (scale == ContrastScale::difference) return numer - denom;
  if (denom <= 0.0)
    throw data_error("ratio contrast unavailable: E[Y(" + std::to_string(x) +
                     ")] is not positive");
  return numer / denom;
}

// Point-estimate table over every unordered category pair (x' > x), one row
// per requested scale, so n categories yield n*(n-1) rows for both scales.
inline AteTable ate_contrasts(
    const PotentialOutcomeEstimates& est,
    std::span<const ContrastScale> scales = std::array{
        ContrastScale::difference, ContrastScale::ratio}) {
  AteTable table;
  const auto n = static_cast<int>(est.means.size());
  for (int x = 1; x <= n; ++x)
    for (int x_prime = x + 1; x_prime <= n; ++x_prime)
      for (const ContrastScale scale : scales) {
        AteRow row;
        row.x = x;
        row.x_prime = x_prime;
        row.scale = scale;
        row.estimate = ate_contrast(est, x_prime, x, scale);
        row.method = method_name(est.method);
        table.rows.push_back(row);
      }
  return table;
}

enum class Link { identity, log };

struct OutcomeModelSpec {
  Link link = Link::identity;
  std::string offset_column;   // person-time; required for the log link
  std::string stratum_column;  // optional stratum fixed effects
  bool include_confounders = false;  // beta2 on C, default excluded
};

struct OutcomeModel {
  Link link = Link::identity;
  double beta0 = 0.0;
  std::vector<double> beta1;          // categories 2..n vs category 1
  std::vector<double> beta2;          // confounders, when included
  std::vector<double> stratum_effects;  // strata 2..S vs stratum 1
  // Response-scale mean per category at the reference stratum / unit offset.
  std::vector<double> category_means;
  bool converged = true;
  int iterations = 0;
  double deviance = 0.0;
};

namespace detail {

struct GlmData {
  Eigen::MatrixXd design;
  Eigen::VectorXd response;
  Eigen::VectorXd weights;
  Eigen::VectorXd offset_log;  // zero when no offset
  std::vector<std::string> column_names;
  int n_categories = 0;
  int n_strata = 1;
  std::size_t n_confounders = 0;
};

// Design: intercept, I(x=2..n), [confounders], [I(stratum=2..S)].
inline GlmData build_glm_data(const TabularDataset& data,
                              std::span<const double> y,
                              std::span<const int> category,
                              std::span<const double> weights,
                              std::span<const std::size_t> source_rows,
                              const OutcomeModelSpec& spec) {
  GlmData out;
  const std::size_t n = y.size();
  int n_cat = 0;
  for (const int c : category) n_cat = std::max(n_cat, c);
  out.n_categories = n_cat;

  std::vector<int> stratum(n, 1);
  if (!spec.stratum_column.empty()) {
    const auto& col = data.column(spec.stratum_column);
    for (std::size_t i = 0; i < n; ++i) {
      stratum[i] = static_cast<int>(col[source_rows[i]]);
      if (stratum[i] < 1)
        throw data_error("stratum labels must be positive integers");
      out.n_strata = std::max(out.n_strata, stratum[i]);
    }
  }

  std::vector<std::string> confounder_names;
  if (spec.include_confounders)
    confounder_names = data.columns_with_role(ColumnRole::confounder);
  out.n_confounders = confounder_names.size();

  const std::size_t p = 1 + static_cast<std::size_t>(n_cat - 1) +
                        confounder_names.size() +
                        static_cast<std::size_t>(out.n_strata - 1);
  out.design = Eigen::MatrixXd::Zero(n, p);
  out.response.resize(n);
  out.weights.resize(n);
  out.offset_log = Eigen::VectorXd::Zero(n);
  out.column_names.push_back("(intercept)");
  for (int x = 2; x <= n_cat; ++x)
    out.column_names.push_back("category_" + std::to_string(x));
  for (const auto& name : confounder_names) out.column_names.push_back(name);
  for (int s = 2; s <= out.n_strata; ++s)
    out.column_names.push_back("stratum_" + std::to_string(s));

  const std::vector<double>* offset_col = nullptr;
  if (!spec.offset_column.empty()) offset_col = &data.column(spec.offset_column);
  if (spec.link == Link::log && offset_col == nullptr)
    throw data_error("log-link outcome model requires an offset column");

  for (std::size_t i = 0; i < n; ++i) {
    out.design(i, 0) = 1.0;
    if (category[i] >= 2) out.design(i, category[i] - 1) = 1.0;
    std::size_t col = static_cast<std::size_t>(n_cat);
    for (const auto& name : confounder_names)
      out.design(i, col++) = data.column(name)[source_rows[i]];
    if (stratum[i] >= 2) out.design(i, col + static_cast<std::size_t>(stratum[i] - 2)) = 1.0;
    out.response[i] = y[i];
    out.weights[i] = weights[i];
    if (offset_col != nullptr) {
      const double t = (*offset_col)[source_rows[i]];
      if (t <= 0.0 || !std::isfinite(t))
        throw data_error("offset (person-time) must be positive; row " +
                         std::to_string(source_rows[i] + 1) + " is " +
                         std::to_string(t));
      out.offset_log[i] = std::log(t);
    }
  }
  return out;
}

inline double poisson_deviance(const Eigen::VectorXd& y,
                               const Eigen::VectorXd& mu,
                               const Eigen::VectorXd& w) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double term = y[i] > 0.0 ? y[i] * std::log(y[i] / mu[i]) : 0.0;
    dev += 2.0 * w[i] * (term - (y[i] - mu[i]));
  }
  return dev;
}

inline OutcomeModel glm_from_coefficients(const GlmData& glm,
                                          const Eigen::VectorXd& beta,
                                          Link link) {
  OutcomeModel model;
  model.link = link;
  model.beta0 = beta[0];
  for (int x = 2; x <= glm.n_categories; ++x)
    model.beta1.push_back(beta[x - 1]);
  for (std::size_t j = 0; j < glm.n_confounders; ++j)
    model.beta2.push_back(beta[static_cast<Eigen::Index>(glm.n_categories) +
                               static_cast<Eigen::Index>(j)]);
  const Eigen::Index strata_base =
      static_cast<Eigen::Index>(glm.n_categories) +
      static_cast<Eigen::Index>(glm.n_confounders);
  for (int s = 2; s <= glm.n_strata; ++s)
    model.stratum_effects.push_back(beta[strata_base + s - 2]);
  model.category_means.resize(static_cast<std::size_t>(glm.n_categories));
  for (int x = 1; x <= glm.n_categories; ++x) {
    const double lin = model.beta0 + (x >= 2 ? model.beta1[static_cast<std::size_t>(x - 2)] : 0.0);
    model.category_means[static_cast<std::size_t>(x - 1)] =
        link == Link::log ? std::exp(lin) : lin;
  }
  return model;
}

// Identity link: one weighted least-squares solve.
inline OutcomeModel fit_glm_identity(const GlmData& glm) {
  const auto fit = weighted_least_squares(glm.design, glm.response, glm.weights,
                                          glm.column_names);
  OutcomeModel model = glm_from_coefficients(glm, fit.coefficients, Link::identity);
  model.deviance = fit.rss;
  return model;
}

// Log link: iteratively reweighted least squares with a log offset;
// converged when the deviance change drops below 1e-10.
inline OutcomeModel fit_glm_log(const GlmData& glm) {
  const Eigen::Index n = glm.design.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    if (glm.response[i] < 0.0)
      throw data_error("log-link outcome model requires nonnegative responses");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(glm.design.cols());
  const double total_y = (glm.weights.array() * glm.response.array()).sum();
  const double total_t =
      (glm.weights.array() * glm.offset_log.array().exp()).sum();
  if (total_y <= 0.0 || total_t <= 0.0)
    throw data_error("log-link outcome model needs positive totals");
  beta[0] = std::log(total_y / total_t);

  double deviance = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= 100; ++iter) {
    const Eigen::VectorXd lin = glm.design * beta + glm.offset_log;
    const Eigen::VectorXd mu = lin.array().exp();
    if (!mu.allFinite())
      throw convergence_error("log-link GLM diverged (non-finite mean)");
    const Eigen::VectorXd z =
        lin - glm.offset_log +
        ((glm.response - mu).array() / mu.array()).matrix();
    const Eigen::VectorXd irls_w = glm.weights.array() * mu.array();
    const auto fit =
        weighted_least_squares(glm.design, z, irls_w, glm.column_names);
    beta = fit.coefficients;

    const Eigen::VectorXd new_mu =
        (glm.design * beta + glm.offset_log).array().exp();
    const double new_deviance =
        poisson_deviance(glm.response, new_mu, glm.weights);
    const bool done = std::abs(deviance - new_deviance) < 1e-10;
    deviance = new_deviance;
    if (done) {
      OutcomeModel model = glm_from_coefficients(glm, beta, Link::log);
      model.deviance = deviance;
      model.iterations = iter;
      return model;
    }
  }
  throw convergence_error("log-link GLM did not converge in 100 iterations");
}

inline OutcomeModel fit_glm(const GlmData& glm, Link link) {
  OutcomeModel model =
      link == Link::identity ? fit_glm_identity(glm) : fit_glm_log(glm);
  return model;
}

}  // namespace detail

// The outcome sample an implementation produces: original rows for IPTW
// (with weights), the replicated matched sample for matching.
struct ImplementedSample {
  EstimatorMethod method = EstimatorMethod::iptw;
  std::vector<std::size_t> source_rows;  // row in the analysis dataset
  std::vector<int> category;             // exposure category of each row
  std::vector<double> weights;
};

inline ImplementedSample implement_iptw(std::span<const int> xc,
                                        const GpsMatrix& gps,
                                        double weight_cap = 10.0) {
  ImplementedSample sample;
  sample.method = EstimatorMethod::iptw;
  sample.source_rows.resize(xc.size());
  sample.category.assign(xc.begin(), xc.end());
  sample.weights.resize(xc.size());
  for (std::size_t j = 0; j < xc.size(); ++j) {
    sample.source_rows[j] = j;
    const double p = gps.probs(static_cast<Eigen::Index>(j), xc[j] - 1);
    if (p <= 0.0)
      throw positivity_error("iptw design: zero probability at row " +
                             std::to_string(j + 1));
    sample.weights[j] = std::min(1.0 / p, weight_cap);
  }
  return sample;
}

inline ImplementedSample implement_matching(const MatchAssignment& assignment) {
  ImplementedSample sample;
  sample.method = EstimatorMethod::matching;
  for (std::size_t x = 0; x < assignment.donors.size(); ++x)
    for (const std::size_t donor : assignment.donors[x]) {
      sample.source_rows.push_back(donor);
      sample.category.push_back(static_cast<int>(x) + 1);
      sample.weights.push_back(1.0);
    }
  return sample;
}

// Single-design GLM on an implemented sample (IPTW or matching).
inline OutcomeModel fit_outcome_glm(const TabularDataset& data,
                                    std::span<const double> y,
                                    const ImplementedSample& sample,
                                    const OutcomeModelSpec& spec) {
  std::vector<double> response(sample.source_rows.size());
  for (std::size_t i = 0; i < response.size(); ++i)
    response[i] = y[sample.source_rows[i]];
  const auto glm = detail::build_glm_data(data, response, sample.category,
                                          sample.weights, sample.source_rows,
                                          spec);
  return detail::fit_glm(glm, spec.link);
}

// Subclassification outcome analysis: per GPS element, fit the model within
// each subclass and combine the per-subclass category means with N_k/N
// weights; coefficients are rebuilt from the combined means on the link
// scale. With the identity link and no extra covariates this reproduces the
// subclassification estimator exactly.
inline OutcomeModel fit_outcome_glm_subclassified(
    const TabularDataset& data, std::span<const double> y,
    std::span<const int> xc, const GpsMatrix& gps, int n_subclasses,
    const OutcomeModelSpec& spec) {
  const std::size_t n_units = gps.n_units();
  const int n_cat = gps.n_categories();
  const SubclassSpec subclass_spec = make_subclass_spec(gps, n_subclasses);

  OutcomeModel combined;
  combined.link = spec.link;
  combined.category_means.resize(static_cast<std::size_t>(n_cat));

  std::vector<double> unit_weights(n_units, 1.0);

  for (int x = 1; x <= n_cat; ++x) {
    std::vector<double> element(n_units);
    for (std::size_t j = 0; j < n_units; ++j)
      element[j] = gps.probs(static_cast<Eigen::Index>(j), x - 1);
    // Same labels and merge rule as estimate_subclassification.
    const auto [labels, merges] = detail::merged_subclass_labels(
        element, xc, x, subclass_spec.boundaries[static_cast<std::size_t>(x - 1)],
        n_subclasses);
    (void)merges;

    double mean_x = 0.0;
    for (int k = 1; k <= n_subclasses; ++k) {
      std::vector<std::size_t> member_rows;
      for (std::size_t j = 0; j < n_units; ++j)
        if (labels[j] == k) member_rows.push_back(j);
      if (member_rows.empty()) continue;

      std::vector<double> sub_y;
      std::vector<int> sub_cat;
      std::vector<double> sub_w;
      bool all_category_x = true;
      for (const std::size_t j : member_rows) {
        sub_y.push_back(y[j]);
        sub_w.push_back(unit_weights[j]);
        all_category_x &= xc[j] == x;
      }
      // Collapse categories other than x so small subclasses stay estimable;
      // the within-subclass fit only needs the category-x adjusted mean.
      for (const std::size_t j : member_rows)
        sub_cat.push_back(all_category_x ? 1 : (xc[j] == x ? 2 : 1));

      const auto glm = detail::build_glm_data(data, sub_y, sub_cat, sub_w,
                                              member_rows, spec);
      const OutcomeModel sub_fit = detail::fit_glm(glm, spec.link);
      combined.iterations = std::max(combined.iterations, sub_fit.iterations);
      const double weight = static_cast<double>(member_rows.size()) /
                            static_cast<double>(n_units);
      mean_x += weight *
                sub_fit.category_means[all_category_x ? 0 : 1];
    }
    combined.category_means[static_cast<std::size_t>(x - 1)] = mean_x;
  }

  const auto link_of = [&](double mu) {
    if (spec.link == Link::identity) return mu;
    if (mu <= 0.0)
      throw data_error("subclassified log-link model produced a nonpositive mean");
    return std::log(mu);
  };
  combined.beta0 = link_of(combined.category_means[0]);
  for (int x = 2; x <= n_cat; ++x)
    combined.beta1.push_back(link_of(combined.category_means[static_cast<std::size_t>(x - 1)]) -
                             combined.beta0);
  return combined;
}

enum class BootstrapMode { standard, m_out_of_n };

struct BootstrapOptions {
  std::size_t replicates = 100;
  BootstrapMode mode = BootstrapMode::standard;
  std::uint64_t seed = 0;
  // m-out-of-n draw size for the main study; 0 means ceil(N^(2/3)).
  std::size_t m = 0;
  // Keep the calibration fit fixed instead of resampling the validation study.
  bool freeze_calibration = false;
  double max_failure_fraction = 0.10;
};

struct BootstrapResult {
  AteTable table;                // point estimates with se / CI filled in
  std::size_t failed_replicates = 0;
  std::vector<std::vector<double>> replicate_estimates;  // per table row
};

// Reruns the full analysis (RC -> GPS -> trim -> estimator -> contrast) on
// resampled data and attaches normal-approximation CIs from the replicate
// standard deviation. The m-out-of-n mode draws m main-study rows without
// replacement and rescales the variance by m/N before extracting the SE.
inline BootstrapResult bootstrap_ate(
    const std::function<AteTable(const TabularDataset&, const TabularDataset&)>&
        analysis,
    const TabularDataset& main, const TabularDataset& validation,
    const AteTable& point_estimates, const BootstrapOptions& options) {
  if (options.replicates < 2)
    throw data_error("bootstrap needs at least 2 replicates");
  const std::size_t n_main = main.n_rows();
  std::size_t m = options.m;
  if (options.mode == BootstrapMode::m_out_of_n) {
    if (m == 0)
      m = static_cast<std::size_t>(
          std::ceil(std::pow(static_cast<double>(n_main), 2.0 / 3.0)));
    if (m > n_main)
      throw data_error("bootstrap: m exceeds the main-study size");
  }

  const std::size_t n_rows = point_estimates.rows.size();
  std::vector<std::vector<double>> draws(n_rows);
  std::size_t failures = 0;
  std::string last_failure;

  for (std::size_t b = 0; b < options.replicates; ++b) {
    RngStream main_rng(options.seed, b, 1);
    RngStream val_rng(options.seed, b, 2);
    const auto main_rows =
        options.mode == BootstrapMode::m_out_of_n
            ? sample_without_replacement(main_rng, n_main, m)
            : sample_with_replacement(main_rng, n_main, n_main);
    const TabularDataset main_b = main.subset(main_rows);
    const TabularDataset val_b =
        options.freeze_calibration
            ? validation
            : validation.subset(sample_with_replacement(
                  val_rng, validation.n_rows(), validation.n_rows()));
    try {
      const AteTable replicate = analysis(main_b, val_b);
      if (replicate.rows.size() != n_rows)
        throw data_error("bootstrap replicate produced a different table shape");
      for (std::size_t r = 0; r < n_rows; ++r)
        draws[r].push_back(replicate.rows[r].estimate);
    } catch (const error& e) {
      ++failures;
      last_failure = e.what();
    }
  }

  const double max_failures =
      options.max_failure_fraction * static_cast<double>(options.replicates);
  if (static_cast<double>(failures) > max_failures)
    throw data_error("bootstrap aborted: " + std::to_string(failures) + " of " +
                     std::to_string(options.replicates) +
                     " replicates failed (last: " + last_failure + ")");

  const double variance_rescale =
      options.mode == BootstrapMode::m_out_of_n
          ? static_cast<double>(m) / static_cast<double>(n_main)
          : 1.0;

  BootstrapResult result;
  result.table = point_estimates;
  result.failed_replicates = failures;
  result.replicate_estimates = draws;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto& values = draws[r];
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    const double variance =
        variance_rescale * ss / static_cast<double>(values.size() - 1);
    auto& row = result.table.rows[r];
    row.se = std::sqrt(variance);
    row.ci_lower = row.estimate - 1.96 * row.se;
    row.ci_upper = row.estimate + 1.96 * row.se;
  }
  return result;
}

}  // namespace rcgps

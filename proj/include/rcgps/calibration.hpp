#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rcgps/detail/least_squares.hpp"
#include "rcgps/errors.hpp"
#include "rcgps/rng.hpp"
#include "rcgps/tabular.hpp"

namespace rcgps {

// Fitted linear calibration model  E(X | W, D) = gamma0 + gamma1 W + gamma2' D
// with homoscedastic residual variance. Immutable after fitting.
struct RcModel {
  double gamma0 = 0.0;
  double gamma1 = 0.0;
  std::vector<double> gamma2;
  double residual_variance = 0.0;   // RSS / (n - p)
  double r_squared = 0.0;
  double se_gamma1 = 0.0;           // classical OLS standard error
  std::string w_column;
  std::vector<std::string> covariate_names;  // D columns, in design order
  std::size_t n_fit = 0;
};

// Ordinary least squares of the true exposure on the error-prone exposure
// and the calibration covariates, fitted in the validation study.
inline RcModel fit_rc(const TabularDataset& validation) {
  const std::string& x_name =
      validation.single_column_with_role(ColumnRole::true_exposure);
  const std::string& w_name =
      validation.single_column_with_role(ColumnRole::error_prone_exposure);
  const std::vector<std::string> d_names =
      validation.columns_with_role(ColumnRole::calibration_covariate);

  const std::size_t n = validation.n_rows();
  const std::size_t p = 2 + d_names.size();
  if (n <= p)
    throw data_error("calibration fit needs more rows (" + std::to_string(n) +
                     ") than coefficients (" + std::to_string(p) + ")");

  Eigen::MatrixXd design(n, p);
  Eigen::VectorXd response(n);
  std::vector<std::string> design_names;
  design_names.reserve(p);
  design_names.push_back("(intercept)");
  design_names.push_back(w_name);
  design_names.insert(design_names.end(), d_names.begin(), d_names.end());

  const auto& x = validation.column(x_name);
  const auto& w = validation.column(w_name);
  for (std::size_t i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    design(i, 1) = w[i];
    response(i) = x[i];
  }
  for (std::size_t j = 0; j < d_names.size(); ++j) {
    const auto& d = validation.column(d_names[j]);
    for (std::size_t i = 0; i < n; ++i) design(i, 2 + j) = d[i];
  }

  const auto fit = detail::ordinary_least_squares(design, response, design_names);

  RcModel model;
  model.gamma0 = fit.coefficients[0];
  model.gamma1 = fit.coefficients[1];
  model.gamma2.assign(fit.coefficients.data() + 2,
                      fit.coefficients.data() + p);
  model.residual_variance = fit.rss / static_cast<double>(n - p);
  model.se_gamma1 =
      std::sqrt(std::max(0.0, model.residual_variance * fit.xtx_inverse(1, 1)));
  model.w_column = w_name;
  model.covariate_names = d_names;
  model.n_fit = n;

  const double mean_x = response.mean();
  const double tss = (response.array() - mean_x).square().sum();
  model.r_squared = tss > 0.0 ? std::clamp(1.0 - fit.rss / tss, 0.0, 1.0)
                              : (fit.rss == 0.0 ? 1.0 : 0.0);
  if (model.residual_variance == 0.0) model.r_squared = 1.0;
  return model;
}

// Linear prediction gamma0 + gamma1 W + gamma2' D for every row of `main`.
inline std::vector<double> predict_xhat(const RcModel& model,
                                        const TabularDataset& main) {
  const std::string& w_name =
      main.has_column(model.w_column)
          ? model.w_column
          : main.single_column_with_role(ColumnRole::error_prone_exposure);
  for (const auto& d_name : model.covariate_names)
    if (!main.has_column(d_name))
      throw schema_error("prediction dataset is missing calibration covariate '" +
                         d_name + "'");

  const auto& w = main.column(w_name);
  std::vector<double> out(main.n_rows());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = model.gamma0 + model.gamma1 * w[i];
  for (std::size_t j = 0; j < model.covariate_names.size(); ++j) {
    const auto& d = main.column(model.covariate_names[j]);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] += model.gamma2[j] * d[i];
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!std::isfinite(out[i]))
      throw data_error("non-finite calibrated exposure at row " +
                       std::to_string(i + 1));
  return out;
}

// Transportability sensitivity draw: gamma1 is replaced by a sample from
// Normal(gamma1, (se(gamma1) + delta_sd)^2). Deterministic given the seed.
inline RcModel perturb_gamma1(const RcModel& model, double delta_sd,
                              std::uint64_t seed) {
  if (delta_sd < 0.0 || !std::isfinite(delta_sd))
    throw data_error("perturb_gamma1: delta_sd must be nonnegative");
  RngStream rng(seed);
  RcModel out = model;
  out.gamma1 = rng.normal(model.gamma1, model.se_gamma1 + delta_sd);
  return out;
}

}  // namespace rcgps

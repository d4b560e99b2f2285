#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "rcgps/errors.hpp"
#include "rcgps/tabular.hpp"

namespace rcgps {

// N x n matrix of per-unit category probabilities; rows sum to one.
struct GpsMatrix {
  Eigen::MatrixXd probs;

  int n_categories() const { return static_cast<int>(probs.cols()); }
  std::size_t n_units() const { return static_cast<std::size_t>(probs.rows()); }

  GpsMatrix select_rows(std::span<const std::size_t> rows) const {
    GpsMatrix out;
    out.probs.resize(rows.size(), probs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      out.probs.row(i) = probs.row(static_cast<Eigen::Index>(rows[i]));
    return out;
  }
};

// Multinomial logit with the highest category as the reference:
//   ln p(x|c)/p(n|c) = eta(x, 0) + eta(x, 1:)' c    for x = 1..n-1.
struct GpsModel {
  Eigen::MatrixXd eta;  // (n-1) x (1 + #confounders)
  int n_categories = 0;
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = std::numeric_limits<double>::infinity();
  double ridge = 0.0;                 // 0 when the plain MLE was used
  std::vector<double> loglik_trace;   // objective after each Newton step
};

struct MultinomialOptions {
  double gradient_tolerance = 1e-8;
  int max_iterations = 100;
  // Separation fallback: refit with an L2 penalty of ridge_scale * N on the
  // slopes when requested. Off by default; fitting separable data errors.
  bool use_ridge = false;
  double ridge_scale = 1e-6;
};

namespace detail {

struct MultinomialWork {
  Eigen::MatrixXd design;  // N x (p+1), leading intercept column
  Eigen::MatrixXd onehot;  // N x (n-1)
  int n_categories = 0;
};

inline MultinomialWork build_multinomial_work(std::span<const int> xc,
                                              const Eigen::MatrixXd& confounders) {
  const std::size_t n_units = xc.size();
  if (n_units == 0) throw data_error("multinomial fit: empty data");
  if (confounders.rows() != 0 &&
      static_cast<std::size_t>(confounders.rows()) != n_units)
    throw data_error("multinomial fit: confounder rows do not match exposure");

  int n_cat = 0;
  for (int c : xc) {
    if (c < 1) throw data_error("multinomial fit: categories must be in 1..n");
    n_cat = std::max(n_cat, c);
  }
  if (n_cat < 2) throw data_error("multinomial fit: need at least 2 categories");
  std::vector<std::size_t> counts(static_cast<std::size_t>(n_cat), 0);
  for (int c : xc) ++counts[static_cast<std::size_t>(c - 1)];
  for (int c = 0; c < n_cat; ++c)
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw data_error("multinomial fit: category " + std::to_string(c + 1) +
                       " was never observed");

  const Eigen::Index p = confounders.cols();
  if (static_cast<Eigen::Index>(n_units) <=
      static_cast<Eigen::Index>(n_cat) * (p + 1))
    throw data_error("multinomial fit: need N > n*(p+1) observations");

  MultinomialWork work;
  work.n_categories = n_cat;
  work.design.resize(n_units, p + 1);
  work.design.col(0).setOnes();
  if (p > 0) work.design.rightCols(p) = confounders;
  work.onehot = Eigen::MatrixXd::Zero(n_units, n_cat - 1);
  for (std::size_t i = 0; i < n_units; ++i)
    if (xc[i] < n_cat) work.onehot(static_cast<Eigen::Index>(i), xc[i] - 1) = 1.0;
  return work;
}

// Row-wise softmax probabilities with the implicit reference logit 0.
inline Eigen::MatrixXd softmax_probs(const Eigen::MatrixXd& design,
                                     const Eigen::MatrixXd& eta) {
  const Eigen::Index n_units = design.rows();
  const Eigen::Index n_cat = eta.rows() + 1;
  Eigen::MatrixXd logits(n_units, n_cat);
  logits.leftCols(n_cat - 1) = design * eta.transpose();
  logits.col(n_cat - 1).setZero();
  Eigen::MatrixXd probs(n_units, n_cat);
  for (Eigen::Index i = 0; i < n_units; ++i) {
    const double peak = logits.row(i).maxCoeff();
    probs.row(i) = (logits.row(i).array() - peak).exp();
    probs.row(i) /= probs.row(i).sum();
  }
  return probs;
}

inline double multinomial_loglik(const MultinomialWork& work,
                                 const Eigen::MatrixXd& eta, double ridge) {
  const Eigen::MatrixXd lin = work.design * eta.transpose();  // N x (n-1)
  double ll = 0.0;
  for (Eigen::Index i = 0; i < lin.rows(); ++i) {
    double peak = 0.0;
    for (Eigen::Index x = 0; x < lin.cols(); ++x) peak = std::max(peak, lin(i, x));
    double denom = std::exp(-peak);
    for (Eigen::Index x = 0; x < lin.cols(); ++x)
      denom += std::exp(lin(i, x) - peak);
    double own = 0.0;
    for (Eigen::Index x = 0; x < lin.cols(); ++x)
      if (work.onehot(i, x) == 1.0) own = lin(i, x);
    ll += own - peak - std::log(denom);
  }
  if (ridge > 0.0)
    // Penalize slopes only; intercepts stay free so fitted marginals are sane.
    ll -= 0.5 * ridge * eta.rightCols(eta.cols() - 1).squaredNorm();
  return ll;
}

}  // namespace detail

// Damped Newton maximization of the multinomial logistic log-likelihood.
// Step halving keeps the objective non-decreasing; iteration stops when the
// gradient max-norm drops below the tolerance.
inline GpsModel fit_multinomial(std::span<const int> xc,
                                const Eigen::MatrixXd& confounders,
                                const MultinomialOptions& options = {}) {
  const auto work = detail::build_multinomial_work(xc, confounders);
  const Eigen::Index n_units = work.design.rows();
  const Eigen::Index cols = work.design.cols();
  const int n_cat = work.n_categories;
  const Eigen::Index n_free = static_cast<Eigen::Index>(n_cat - 1) * cols;
  const double ridge =
      options.use_ridge
          ? options.ridge_scale * static_cast<double>(n_units)
          : 0.0;

  GpsModel model;
  model.n_categories = n_cat;
  model.ridge = ridge;
  model.eta = Eigen::MatrixXd::Zero(n_cat - 1, cols);

  double ll = detail::multinomial_loglik(work, model.eta, ridge);
  model.loglik_trace.push_back(ll);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::MatrixXd probs = detail::softmax_probs(work.design, model.eta);

    Eigen::VectorXd gradient(n_free);
    for (int x = 0; x < n_cat - 1; ++x) {
      const Eigen::VectorXd resid = work.onehot.col(x) - probs.col(x);
      gradient.segment(static_cast<Eigen::Index>(x) * cols, cols) =
          work.design.transpose() * resid;
    }
    Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(n_free, n_free);
    for (int a = 0; a < n_cat - 1; ++a) {
      for (int b = a; b < n_cat - 1; ++b) {
        Eigen::VectorXd scale;
        if (a == b)
          scale = (probs.col(a).array() * (1.0 - probs.col(a).array())).matrix();
        else
          scale = (-probs.col(a).array() * probs.col(b).array()).matrix();
        const Eigen::MatrixXd block =
            work.design.transpose() * scale.asDiagonal() * work.design;
        hessian.block(static_cast<Eigen::Index>(a) * cols,
                      static_cast<Eigen::Index>(b) * cols, cols, cols) = block;
        if (a != b)
          hessian.block(static_cast<Eigen::Index>(b) * cols,
                        static_cast<Eigen::Index>(a) * cols, cols, cols) = block;
      }
    }
    if (ridge > 0.0) {
      for (int x = 0; x < n_cat - 1; ++x)
        for (Eigen::Index j = 1; j < cols; ++j) {
          const Eigen::Index k = static_cast<Eigen::Index>(x) * cols + j;
          gradient[k] -= ridge * model.eta(x, j);
          hessian(k, k) += ridge;
        }
    }

    model.final_gradient_norm = gradient.lpNorm<Eigen::Infinity>();
    model.iterations = iter - 1;
    if (model.final_gradient_norm < options.gradient_tolerance) {
      // A vanishing gradient with saturated probabilities is separation,
      // not convergence: the likelihood has no interior maximum.
      if (ridge == 0.0 && probs.minCoeff() < 1e-12 &&
          model.eta.lpNorm<Eigen::Infinity>() > 1e3)
        throw separation_error(
            "multinomial fit: separation detected (fitted probability below "
            "1e-12 with diverging coefficients); enable the ridge option to "
            "proceed");
      model.converged = true;
      return model;
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    Eigen::VectorXd step = ldlt.solve(gradient);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      if (probs.minCoeff() < 1e-12 && model.eta.lpNorm<Eigen::Infinity>() > 1e3)
        throw separation_error(
            "multinomial fit: separation detected (fitted probability below "
            "1e-12 with diverging coefficients); enable the ridge option to "
            "proceed");
      throw convergence_error("multinomial fit: singular Hessian (collinear "
                              "confounders or degenerate categories)");
    }

    Eigen::MatrixXd candidate = model.eta;
    double step_scale = 1.0;
    double new_ll = -std::numeric_limits<double>::infinity();
    // Near the optimum the objective change sits below double rounding noise
    // on a sum of N log terms; accept within that noise so the quadratic
    // Newton phase can push the gradient to the tolerance.
    const double accept_slack = 1e-12 * (1.0 + std::abs(ll));
    for (int halving = 0; halving < 40; ++halving) {
      for (int x = 0; x < n_cat - 1; ++x)
        candidate.row(x) =
            model.eta.row(x) +
            step_scale *
                step.segment(static_cast<Eigen::Index>(x) * cols, cols).transpose();
      new_ll = detail::multinomial_loglik(work, candidate, ridge);
      if (new_ll >= ll - accept_slack) break;
      step_scale *= 0.5;
    }
    if (new_ll < ll - accept_slack) break;  // no ascent left at this precision
    model.eta = candidate;
    ll = new_ll;
    model.loglik_trace.push_back(ll);
  }

  model.iterations = options.max_iterations;
  // Distinguish separation from generic non-convergence before giving up.
  const Eigen::MatrixXd probs = detail::softmax_probs(work.design, model.eta);
  if (probs.minCoeff() < 1e-12 &&
      model.eta.lpNorm<Eigen::Infinity>() > 1e3)
    throw separation_error(
        "multinomial fit: separation detected (fitted probability below 1e-12 "
        "with diverging coefficients); enable the ridge option to proceed");
  std::ostringstream message;
  message << "multinomial fit: no convergence after " << options.max_iterations
          << " iterations (gradient max-norm " << model.final_gradient_norm
          << ")";
  throw convergence_error(message.str());
}

// Softmax prediction with the reference logit fixed at zero.
inline GpsMatrix predict_gps(const GpsModel& model,
                             const Eigen::MatrixXd& confounders) {
  if (confounders.cols() + 1 != model.eta.cols())
    throw schema_error("predict_gps: confounder count " +
                       std::to_string(confounders.cols()) +
                       " does not match the fitted model (" +
                       std::to_string(model.eta.cols() - 1) + ")");
  Eigen::MatrixXd design(confounders.rows(), model.eta.cols());
  design.col(0).setOnes();
  if (confounders.cols() > 0) design.rightCols(confounders.cols()) = confounders;
  GpsMatrix out;
  out.probs = detail::softmax_probs(design, model.eta);
  return out;
}

enum class TrimStrategy { none, range_intersection, quantile };

struct TrimResult {
  std::vector<std::size_t> kept_rows;
  double kept_fraction = 1.0;
  // Per element: the [lower, upper] interval units had to fall into.
  std::vector<std::pair<double, double>> intervals;
};

// Common-support trimming: for each GPS element, keep units whose value lies
// inside the intersection of the per-exposure-group ranges
// [max_g min_{j in g} p, min_g max_{j in g} p].
inline TrimResult trim_overlap_ranges(const GpsMatrix& gps,
                                      std::span<const int> xc) {
  const std::size_t n_units = gps.n_units();
  const int n_cat = gps.n_categories();
  if (xc.size() != n_units)
    throw data_error("trim_overlap: exposure vector does not align with GPS rows");

  TrimResult result;
  result.intervals.resize(static_cast<std::size_t>(n_cat));
  for (int x = 0; x < n_cat; ++x) {
    std::vector<double> group_min(static_cast<std::size_t>(n_cat),
                                  std::numeric_limits<double>::infinity());
    std::vector<double> group_max(static_cast<std::size_t>(n_cat),
                                  -std::numeric_limits<double>::infinity());
    for (std::size_t j = 0; j < n_units; ++j) {
      const auto g = static_cast<std::size_t>(xc[j] - 1);
      const double p = gps.probs(static_cast<Eigen::Index>(j), x);
      group_min[g] = std::min(group_min[g], p);
      group_max[g] = std::max(group_max[g], p);
    }
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (int g = 0; g < n_cat; ++g) {
      if (!std::isfinite(group_min[static_cast<std::size_t>(g)])) continue;  // empty group
      lower = std::max(lower, group_min[static_cast<std::size_t>(g)]);
      upper = std::min(upper, group_max[static_cast<std::size_t>(g)]);
    }
    if (lower > upper)
      throw data_error("trim_overlap: empty range intersection for GPS element " +
                       std::to_string(x + 1) + " (no common support)");
    result.intervals[static_cast<std::size_t>(x)] = {lower, upper};
  }

  for (std::size_t j = 0; j < n_units; ++j) {
    bool keep = true;
    for (int x = 0; x < n_cat && keep; ++x) {
      const double p = gps.probs(static_cast<Eigen::Index>(j), x);
      const auto& [lo, hi] = result.intervals[static_cast<std::size_t>(x)];
      keep = p >= lo && p <= hi;
    }
    if (keep) result.kept_rows.push_back(j);
  }
  if (result.kept_rows.empty())
    throw data_error("trim_overlap: every unit was trimmed");
  result.kept_fraction =
      static_cast<double>(result.kept_rows.size()) / static_cast<double>(n_units);
  return result;
}

// Alternative symmetric-quantile trimming (Crump-style): per element, keep
// units between the alpha and 1-alpha quantiles of the pooled element values.
inline TrimResult trim_overlap_quantiles(const GpsMatrix& gps,
                                         std::span<const int> xc,
                                         double alpha) {
  if (alpha < 0.0 || alpha >= 0.5)
    throw data_error("quantile trimming needs alpha in [0, 0.5)");
  const std::size_t n_units = gps.n_units();
  if (xc.size() != n_units)
    throw data_error("trim_overlap: exposure vector does not align with GPS rows");
  const int n_cat = gps.n_categories();

  TrimResult result;
  result.intervals.resize(static_cast<std::size_t>(n_cat));
  for (int x = 0; x < n_cat; ++x) {
    std::vector<double> values(n_units);
    for (std::size_t j = 0; j < n_units; ++j)
      values[j] = gps.probs(static_cast<Eigen::Index>(j), x);
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double q) {
      const double h = q * static_cast<double>(n_units - 1);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const auto hi = std::min(lo + 1, n_units - 1);
      return values[lo] + (h - std::floor(h)) * (values[hi] - values[lo]);
    };
    result.intervals[static_cast<std::size_t>(x)] = {quantile(alpha),
                                                     quantile(1.0 - alpha)};
  }
  for (std::size_t j = 0; j < n_units; ++j) {
    bool keep = true;
    for (int x = 0; x < n_cat && keep; ++x) {
      const double p = gps.probs(static_cast<Eigen::Index>(j), x);
      const auto& [lo, hi] = result.intervals[static_cast<std::size_t>(x)];
      keep = p >= lo && p <= hi;
    }
    if (keep) result.kept_rows.push_back(j);
  }
  if (result.kept_rows.empty())
    throw data_error("trim_overlap: every unit was trimmed");
  result.kept_fraction =
      static_cast<double>(result.kept_rows.size()) / static_cast<double>(n_units);
  return result;
}

struct TrimmedData {
  TabularDataset dataset;
  GpsMatrix gps;
  std::vector<int> xc;
  TrimResult trim;
};

inline TrimmedData trim_overlap(const TabularDataset& dataset,
                                const GpsMatrix& gps, std::span<const int> xc,
                                TrimStrategy strategy = TrimStrategy::range_intersection,
                                double quantile_alpha = 0.05) {
  TrimmedData out;
  switch (strategy) {
    case TrimStrategy::none: {
      out.trim.kept_rows.resize(gps.n_units());
      std::iota(out.trim.kept_rows.begin(), out.trim.kept_rows.end(), 0);
      out.trim.kept_fraction = 1.0;
      break;
    }
    case TrimStrategy::range_intersection:
      out.trim = trim_overlap_ranges(gps, xc);
      break;
    case TrimStrategy::quantile:
      out.trim = trim_overlap_quantiles(gps, xc, quantile_alpha);
      break;
  }
  out.dataset = dataset.subset(out.trim.kept_rows);
  out.gps = gps.select_rows(out.trim.kept_rows);
  out.xc.reserve(out.trim.kept_rows.size());
  for (const std::size_t j : out.trim.kept_rows) out.xc.push_back(xc[j]);
  return out;
}

}  // namespace rcgps

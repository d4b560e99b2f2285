#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "rcgps/errors.hpp"

namespace rcgps::detail {

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;
  double rss = 0.0;
  Eigen::MatrixXd xtx_inverse;  // unscaled (X^T W X)^{-1}, for standard errors
  int rank = 0;
};

// Weighted least squares through a column-pivoted QR factorization of the
// (row-scaled) design. Rank deficiency is reported with the names of the
// columns that the pivoting identified as linearly dependent.
inline LeastSquaresFit weighted_least_squares(
    const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
    const Eigen::VectorXd& weights,
    const std::vector<std::string>& column_names) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n)
    throw data_error("least squares: design and response row counts differ");
  if (weights.size() != n)
    throw data_error("least squares: design and weight row counts differ");
  for (Eigen::Index i = 0; i < n; ++i)
    if (weights[i] < 0.0)
      throw data_error("least squares: negative weight at row " +
                       std::to_string(i + 1));

  const Eigen::VectorXd root_w = weights.array().sqrt();
  const Eigen::MatrixXd scaled = root_w.asDiagonal() * design;
  const Eigen::VectorXd scaled_y = root_w.asDiagonal() * response;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < p) {
    std::string dependent;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index k = qr.rank(); k < p; ++k) {
      if (!dependent.empty()) dependent += ", ";
      const Eigen::Index col = perm[k];
      dependent += col < static_cast<Eigen::Index>(column_names.size())
                       ? column_names[col]
                       : "column " + std::to_string(col + 1);
    }
    throw singular_design_error("rank-deficient design; collinear columns: " +
                                dependent);
  }

  LeastSquaresFit fit;
  fit.rank = static_cast<int>(qr.rank());
  fit.coefficients = qr.solve(scaled_y);
  fit.rss = (scaled_y - scaled * fit.coefficients).squaredNorm();
  const Eigen::MatrixXd xtx = scaled.transpose() * scaled;
  fit.xtx_inverse = xtx.ldlt().solve(
      Eigen::MatrixXd::Identity(p, p));
  return fit;
}

inline LeastSquaresFit ordinary_least_squares(
    const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
    const std::vector<std::string>& column_names) {
  return weighted_least_squares(design, response,
                                Eigen::VectorXd::Ones(design.rows()),
                                column_names);
}

}  // namespace rcgps::detail

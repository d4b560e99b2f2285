#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <vector>

#include "rcgps/gps.hpp"
#include "support/oracles.hpp"
#include "rcgps/rng.hpp"

using namespace rcgps;

namespace {

Eigen::MatrixXd random_confounders(RngStream& rng, std::size_t n, std::size_t p) {
  Eigen::MatrixXd c(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rng.normal(0.0, 1.0);
  return c;
}

}  // namespace

TEST_CASE("binary multinomial fit matches the logistic oracle") {
  RngStream rng(314);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 200;
    const Eigen::MatrixXd c = random_confounders(rng, n, 3);
    std::vector<int> xc(n);
    std::vector<std::vector<double>> z(n, std::vector<double>(4));
    for (std::size_t i = 0; i < n; ++i) {
      const double lin = 0.3 - 0.8 * c(static_cast<Eigen::Index>(i), 0) +
                         0.5 * c(static_cast<Eigen::Index>(i), 1) +
                         0.2 * c(static_cast<Eigen::Index>(i), 2);
      const double prob = 1.0 / (1.0 + std::exp(-lin));
      xc[i] = rng.uniform01() < prob ? 1 : 2;
      z[i] = {1.0, c(static_cast<Eigen::Index>(i), 0),
              c(static_cast<Eigen::Index>(i), 1), c(static_cast<Eigen::Index>(i), 2)};
    }
    const GpsModel model = fit_multinomial(xc, c);
    REQUIRE(model.converged);
    const auto oracle = rcgps_test::binary_logistic_oracle(xc, z);
    for (int j = 0; j < 4; ++j)
      CHECK_THAT(model.eta(0, j), Catch::Matchers::WithinAbs(oracle[static_cast<std::size_t>(j)], 1e-6));
  }
}

TEST_CASE("intercept-only fit reproduces category frequencies") {
  RngStream rng(55);
  const std::size_t n = 200;
  std::vector<int> xc(n);
  std::vector<double> counts(3, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    xc[i] = 1 + static_cast<int>(rng.index(3));
    counts[static_cast<std::size_t>(xc[i] - 1)] += 1.0;
  }
  const Eigen::MatrixXd no_confounders(n, 0);
  const GpsModel model = fit_multinomial(xc, no_confounders);
  REQUIRE(model.converged);
  const GpsMatrix gps = predict_gps(model, no_confounders);
  for (int x = 0; x < 3; ++x)
    CHECK_THAT(gps.probs(0, x),
               Catch::Matchers::WithinAbs(counts[static_cast<std::size_t>(x)] / static_cast<double>(n), 1e-9));
}

TEST_CASE("log-likelihood is non-decreasing across Newton iterations") {
  RngStream rng(77);
  const std::size_t n = 300;
  const Eigen::MatrixXd c = random_confounders(rng, n, 2);
  std::vector<int> xc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l1 = 0.5 * c(static_cast<Eigen::Index>(i), 0);
    const double l2 = -0.4 * c(static_cast<Eigen::Index>(i), 1);
    const double d = 1.0 + std::exp(l1) + std::exp(l2);
    const double u = rng.uniform01();
    xc[i] = u < std::exp(l1) / d ? 1 : (u < (std::exp(l1) + std::exp(l2)) / d ? 2 : 3);
  }
  const GpsModel model = fit_multinomial(xc, c);
  REQUIRE(model.converged);
  CHECK(model.final_gradient_norm < 1e-8);
  for (std::size_t i = 1; i < model.loglik_trace.size(); ++i)
    CHECK(model.loglik_trace[i] >= model.loglik_trace[i - 1]);
}

TEST_CASE("perfect separation is detected and the ridge fallback works") {
  // xc = 1 iff c1 > 0, with tight margins on both sides of zero so the
  // likelihood keeps improving until the coefficients clearly diverge.
  const std::size_t n = 60;
  Eigen::MatrixXd c(n, 1);
  std::vector<int> xc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double magnitude = 0.01 + 2.0 * static_cast<double>(i / 2) / 30.0;
    const double sign = i % 2 == 0 ? 1.0 : -1.0;
    c(static_cast<Eigen::Index>(i), 0) = sign * magnitude;
    xc[i] = c(static_cast<Eigen::Index>(i), 0) > 0.0 ? 1 : 2;
  }
  CHECK_THROWS_AS(fit_multinomial(xc, c), separation_error);

  MultinomialOptions ridge;
  ridge.use_ridge = true;
  const GpsModel model = fit_multinomial(xc, c, ridge);
  CHECK(model.converged);
  CHECK(model.ridge > 0.0);
}

TEST_CASE("fit rejects degenerate inputs") {
  const Eigen::MatrixXd c(12, 0);
  std::vector<int> missing_category(12, 1);
  missing_category[0] = 3;  // category 2 never observed
  CHECK_THROWS_AS(fit_multinomial(missing_category, c), data_error);

  std::vector<int> tiny = {1, 2};
  const Eigen::MatrixXd c2(2, 0);
  CHECK_THROWS_AS(fit_multinomial(tiny, c2), data_error);
}

TEST_CASE("predict_gps handles closed-form cases") {
  GpsModel model;
  model.n_categories = 3;
  model.eta = Eigen::MatrixXd::Zero(2, 1);
  const Eigen::MatrixXd no_confounders(4, 0);
  GpsMatrix gps = predict_gps(model, no_confounders);
  for (int x = 0; x < 3; ++x)
    CHECK_THAT(gps.probs(0, x), Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-15));

  model.eta(0, 0) = std::log(2.0);  // intercepts (log 2, log 1) vs reference
  model.eta(1, 0) = 0.0;
  gps = predict_gps(model, no_confounders);
  CHECK_THAT(gps.probs(0, 0), Catch::Matchers::WithinAbs(0.5, 1e-12));
  CHECK_THAT(gps.probs(0, 1), Catch::Matchers::WithinAbs(0.25, 1e-12));
  CHECK_THAT(gps.probs(0, 2), Catch::Matchers::WithinAbs(0.25, 1e-12));

  Eigen::MatrixXd wrong(4, 2);
  CHECK_THROWS_AS(predict_gps(model, wrong), schema_error);
}

TEST_CASE("predicted rows sum to one and stay positive") {
  RngStream rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 50;
    const std::size_t p = 1 + rng.index(4);
    GpsModel model;
    model.n_categories = 2 + static_cast<int>(rng.index(4));
    model.eta.resize(model.n_categories - 1, static_cast<Eigen::Index>(p) + 1);
    for (Eigen::Index r = 0; r < model.eta.rows(); ++r)
      for (Eigen::Index c = 0; c < model.eta.cols(); ++c)
        model.eta(r, c) = rng.uniform(-3.0, 3.0);
    const Eigen::MatrixXd confounders = random_confounders(rng, n, p);
    const GpsMatrix gps = predict_gps(model, confounders);
    for (std::size_t j = 0; j < n; ++j) {
      const double row_sum = gps.probs.row(static_cast<Eigen::Index>(j)).sum();
      REQUIRE(std::abs(row_sum - 1.0) < 1e-12);
      REQUIRE(gps.probs.row(static_cast<Eigen::Index>(j)).minCoeff() > 0.0);
    }
  }
}

TEST_CASE("label permutation permutes predicted probabilities") {
  RngStream rng(321);
  const std::size_t n = 400;
  const Eigen::MatrixXd c = random_confounders(rng, n, 2);
  std::vector<int> xc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double l1 = 0.8 * c(static_cast<Eigen::Index>(i), 0);
    const double l2 = -0.6 * c(static_cast<Eigen::Index>(i), 1);
    const double d = 1.0 + std::exp(l1) + std::exp(l2);
    const double u = rng.uniform01();
    xc[i] = u < std::exp(l1) / d ? 1 : (u < (std::exp(l1) + std::exp(l2)) / d ? 2 : 3);
  }
  // Permutation sigma: 1 -> 2, 2 -> 3, 3 -> 1.
  const std::array<int, 3> sigma = {2, 3, 1};
  std::vector<int> permuted(n);
  for (std::size_t i = 0; i < n; ++i)
    permuted[i] = sigma[static_cast<std::size_t>(xc[i] - 1)];

  const GpsMatrix base = predict_gps(fit_multinomial(xc, c), c);
  const GpsMatrix moved = predict_gps(fit_multinomial(permuted, c), c);
  for (std::size_t i = 0; i < n; ++i)
    for (int x = 1; x <= 3; ++x)
      CHECK_THAT(moved.probs(static_cast<Eigen::Index>(i),
                             sigma[static_cast<std::size_t>(x - 1)] - 1),
                 Catch::Matchers::WithinAbs(
                     base.probs(static_cast<Eigen::Index>(i), x - 1), 1e-6));
}

namespace {

// Hand-built instance: rows sum to one; unit 0's first element (0.01) sits
// below every other group's element-1 minimum (0.05), everything else lies
// inside the per-element range intersections.
GpsMatrix toy_gps() {
  GpsMatrix gps;
  gps.probs.resize(7, 3);
  gps.probs << 0.01, 0.59, 0.40,  // unit 0, group 1  (the outlier)
      0.05, 0.55, 0.40,           // unit 1, group 1
      0.30, 0.30, 0.40,           // unit 2, group 1
      0.05, 0.55, 0.40,           // unit 3, group 2
      0.30, 0.30, 0.40,           // unit 4, group 2
      0.05, 0.55, 0.40,           // unit 5, group 3
      0.30, 0.30, 0.40;           // unit 6, group 3
  return gps;
}

}  // namespace

TEST_CASE("trim_overlap removes exactly the non-overlapping unit") {
  const GpsMatrix gps = toy_gps();
  const std::vector<int> xc = {1, 1, 1, 2, 2, 3, 3};
  TabularDataset data;
  data.add_column("y", {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0}, ColumnRole::outcome);

  const TrimmedData trimmed = trim_overlap(data, gps, xc);
  CHECK(trimmed.trim.kept_rows == std::vector<std::size_t>{1, 2, 3, 4, 5, 6});
  CHECK_THAT(trimmed.trim.kept_fraction,
             Catch::Matchers::WithinAbs(6.0 / 7.0, 1e-12));
  CHECK(trimmed.dataset.n_rows() == 6);
  CHECK(trimmed.xc == std::vector<int>{1, 1, 2, 2, 3, 3});
}

TEST_CASE("trim_overlap keeps everything when groups share support") {
  // Three groups with identical GPS rows; nothing can be outside the
  // intersection, and re-trimming is a no-op (idempotence on overlapping data).
  GpsMatrix gps;
  gps.probs.resize(9, 3);
  for (int g = 0; g < 3; ++g) {
    gps.probs.row(3 * g + 0) << 0.2, 0.3, 0.5;
    gps.probs.row(3 * g + 1) << 0.4, 0.35, 0.25;
    gps.probs.row(3 * g + 2) << 0.1, 0.6, 0.3;
  }
  const std::vector<int> xc = {1, 1, 1, 2, 2, 2, 3, 3, 3};
  TabularDataset data;
  data.add_column("y", std::vector<double>(9, 1.0), ColumnRole::outcome);

  const TrimmedData once = trim_overlap(data, gps, xc);
  CHECK(once.trim.kept_rows.size() == 9);
  const TrimmedData twice = trim_overlap(once.dataset, once.gps, once.xc);
  CHECK(twice.trim.kept_rows.size() == 9);
}

TEST_CASE("trim_overlap reports an empty intersection") {
  GpsMatrix gps;
  gps.probs.resize(4, 2);
  gps.probs << 0.9, 0.1,  // group 1 lives high on element 1
      0.8, 0.2,
      0.2, 0.8,           // group 2 lives low on element 1
      0.1, 0.9;
  const std::vector<int> xc = {1, 1, 2, 2};
  TabularDataset data;
  data.add_column("y", std::vector<double>(4, 0.0), ColumnRole::outcome);
  CHECK_THROWS_AS(trim_overlap(data, gps, xc), data_error);
}

TEST_CASE("quantile trimming strategy is available") {
  RngStream rng(888);
  GpsMatrix gps;
  const std::size_t n = 200;
  gps.probs.resize(static_cast<Eigen::Index>(n), 2);
  std::vector<int> xc(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = rng.uniform(0.01, 0.99);
    gps.probs(static_cast<Eigen::Index>(i), 0) = p;
    gps.probs(static_cast<Eigen::Index>(i), 1) = 1.0 - p;
    xc[i] = rng.uniform01() < p ? 1 : 2;
  }
  TabularDataset data;
  data.add_column("y", std::vector<double>(n, 0.0), ColumnRole::outcome);
  const TrimmedData trimmed =
      trim_overlap(data, gps, xc, TrimStrategy::quantile, 0.05);
  CHECK(trimmed.trim.kept_fraction < 1.0);
  CHECK(trimmed.trim.kept_fraction > 0.8);
}

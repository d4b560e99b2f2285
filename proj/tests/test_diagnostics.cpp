#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "rcgps/diagnostics.hpp"
#include "rcgps/rng.hpp"

using namespace rcgps;

TEST_CASE("asb is zero for identical group means") {
  const std::vector<double> covariate = {1.0, 2.0, 3.0, 1.0, 2.0, 3.0};
  const std::vector<int> xc = {1, 1, 1, 2, 2, 2};
  CHECK_THAT(asb(covariate, xc, 1), Catch::Matchers::WithinAbs(0.0, 1e-14));
}

TEST_CASE("asb matches the hand computation") {
  // Group means 1 and 0; the full-sample SD is pinned by construction.
  // Sample: treated {-1, 3}, comparison {-2, 2}; means 1 and 0.
  // Full-sample mean 0.5, squared deviations 2.25+6.25+6.25+2.25 = 17,
  // SD = sqrt(17/3); ASB = 1/sqrt(17/3).
  const std::vector<double> covariate = {-1.0, 3.0, -2.0, 2.0};
  const std::vector<int> xc = {1, 1, 2, 2};
  const double expected = 1.0 / std::sqrt(17.0 / 3.0);
  CHECK_THAT(asb(covariate, xc, 1), Catch::Matchers::WithinAbs(expected, 1e-12));

  // Dividing a mean difference of 1 by a pooled SD of 2 gives 0.5: rescale
  // the covariate so its full-sample SD is exactly 2.
  std::vector<double> scaled = covariate;
  const double factor = 2.0 / std::sqrt(17.0 / 3.0);
  for (auto& v : scaled) v *= factor;
  CHECK_THAT(asb(scaled, xc, 1),
             Catch::Matchers::WithinAbs(factor * 1.0 / 2.0, 1e-12));
}

TEST_CASE("asb rejects constant covariates and empty groups") {
  const std::vector<double> constant = {1.0, 1.0, 1.0, 1.0};
  const std::vector<int> xc = {1, 1, 2, 2};
  CHECK_THROWS_AS(asb(constant, xc, 1), data_error);

  const std::vector<double> covariate = {1.0, 2.0, 3.0, 4.0};
  const std::vector<int> all_one = {1, 1, 1, 1};
  CHECK_THROWS_AS(asb(covariate, all_one, 1), data_error);
}

TEST_CASE("asb is invariant to affine rescaling of the covariate") {
  RngStream rng(64);
  std::vector<double> covariate(100);
  std::vector<int> xc(100);
  std::vector<double> weights(100);
  for (std::size_t i = 0; i < covariate.size(); ++i) {
    covariate[i] = rng.normal(0.0, 2.0);
    xc[i] = 1 + static_cast<int>(rng.index(3));
    weights[i] = rng.uniform(0.5, 4.0);
  }
  BalanceDesign weighted;
  weighted.kind = BalanceDesign::Kind::weights;
  weighted.weights = weights;

  std::vector<double> transformed(covariate.size());
  for (std::size_t i = 0; i < covariate.size(); ++i)
    transformed[i] = -3.5 * covariate[i] + 11.0;
  for (int x = 1; x <= 3; ++x) {
    CHECK_THAT(asb(transformed, xc, x),
               Catch::Matchers::WithinRel(asb(covariate, xc, x), 1e-10));
    CHECK_THAT(asb(transformed, xc, x, weighted),
               Catch::Matchers::WithinRel(asb(covariate, xc, x, weighted), 1e-10));
  }
}

TEST_CASE("group-proportional weights yield perfect balance") {
  // Two groups with different covariate distributions; weighting each unit
  // by 1/p(own group) with p constant within covariate level equalizes the
  // weighted means exactly. Construct: covariate levels {0,1}; treated picks
  // level 1 with probability 3/4, comparison with 1/4; weights 1/p fix it.
  std::vector<double> covariate;
  std::vector<int> xc;
  std::vector<double> weights;
  // treated (x=1): 3 units at level 1 (p=3/4), 1 at level 0 (p=1/4)
  for (int i = 0; i < 3; ++i) {
    covariate.push_back(1.0);
    xc.push_back(1);
    weights.push_back(1.0 / 0.75);
  }
  covariate.push_back(0.0);
  xc.push_back(1);
  weights.push_back(1.0 / 0.25);
  // comparison (x=2): 1 unit at level 1 (p=1/4), 3 at level 0 (p=3/4)
  covariate.push_back(1.0);
  xc.push_back(2);
  weights.push_back(1.0 / 0.25);
  for (int i = 0; i < 3; ++i) {
    covariate.push_back(0.0);
    xc.push_back(2);
    weights.push_back(1.0 / 0.75);
  }

  BalanceDesign design;
  design.kind = BalanceDesign::Kind::weights;
  design.weights = weights;
  CHECK_THAT(asb(covariate, xc, 1, design),
             Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK(asb(covariate, xc, 1) > 0.4);  // unweighted imbalance is large
}

TEST_CASE("matched design compares donated covariates across origin groups") {
  // Donors for category 1 are units 0 (c=5) and 1 (c=9). Units 2 and 3
  // (category 2) match to donors 1 and 0 respectively. The matched split
  // compares mean(c of self-matches) vs mean(c of donated values).
  const std::vector<double> covariate = {5.0, 9.0, 8.0, 6.0};
  const std::vector<int> xc = {1, 1, 2, 2};
  MatchAssignment assignment;
  assignment.donors = {{0, 1, 1, 0}, {2, 2, 2, 3}};
  BalanceDesign design;
  design.kind = BalanceDesign::Kind::matched;
  design.assignment = &assignment;

  // Before: |mean(5,9) - mean(8,6)| / sd = 0 / sd = 0... construct instead
  // with the after-design: group x=1 rows donate (5,9), group !=1 rows donate
  // (9,5): means 7 and 7, perfectly balanced after matching.
  CHECK_THAT(asb(covariate, xc, 1, design),
             Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("subclass design averages within-subclass differences") {
  // Two subclasses split at the element median. Within each subclass the
  // covariate is balanced between groups; pooled over all units it is not.
  GpsMatrix gps;
  gps.probs.resize(8, 2);
  const std::vector<double> element1 = {0.1, 0.2, 0.3, 0.4, 0.6, 0.7, 0.8, 0.9};
  for (std::size_t i = 0; i < 8; ++i) {
    gps.probs(static_cast<Eigen::Index>(i), 0) = element1[i];
    gps.probs(static_cast<Eigen::Index>(i), 1) = 1.0 - element1[i];
  }
  const std::vector<int> xc = {1, 2, 1, 2, 1, 2, 1, 2};
  const std::vector<double> covariate = {1.0, 1.0, 2.0, 2.0, 7.0, 7.0, 9.0, 9.0};

  BalanceDesign design;
  design.kind = BalanceDesign::Kind::subclasses;
  design.gps = &gps;
  design.n_subclasses = 2;
  CHECK_THAT(asb(covariate, xc, 1, design),
             Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK(asb(covariate, xc, 1) >= 0.0);
}

TEST_CASE("overlap summary conserves group counts") {
  RngStream rng(27);
  const std::size_t n = 500;
  GpsMatrix gps;
  gps.probs.resize(static_cast<Eigen::Index>(n), 3);
  std::vector<int> xc(n);
  std::vector<std::size_t> group_sizes(3, 0);
  for (std::size_t i = 0; i < n; ++i) {
    double a = rng.uniform(0.1, 1.0), b = rng.uniform(0.1, 1.0),
           c = rng.uniform(0.1, 1.0);
    const double total = a + b + c;
    gps.probs(static_cast<Eigen::Index>(i), 0) = a / total;
    gps.probs(static_cast<Eigen::Index>(i), 1) = b / total;
    gps.probs(static_cast<Eigen::Index>(i), 2) = c / total;
    xc[i] = 1 + static_cast<int>(rng.index(3));
    ++group_sizes[static_cast<std::size_t>(xc[i] - 1)];
  }
  const OverlapSummary summary = overlap_summary(gps, xc, 30);
  REQUIRE(summary.groups.size() == 9);
  for (const auto& group : summary.groups) {
    std::size_t total = 0;
    for (const std::size_t count : group.histogram) total += count;
    CHECK(total == group_sizes[static_cast<std::size_t>(group.group - 1)]);
  }
}

TEST_CASE("constant gps produces one occupied bin and identical ranges") {
  GpsMatrix gps;
  gps.probs = Eigen::MatrixXd::Constant(10, 2, 0.5);
  const std::vector<int> xc = {1, 1, 1, 1, 1, 2, 2, 2, 2, 2};
  const OverlapSummary summary = overlap_summary(gps, xc, 30);
  for (const auto& group : summary.groups) {
    CHECK(group.min == 0.5);
    CHECK(group.max == 0.5);
    std::size_t occupied = 0;
    for (const std::size_t count : group.histogram)
      if (count > 0) ++occupied;
    CHECK(occupied == 1);
  }
  for (const double fraction : summary.intersection_fraction)
    CHECK(fraction == 1.0);
}

TEST_CASE("overlap summary validates inputs") {
  GpsMatrix gps;
  gps.probs = Eigen::MatrixXd::Constant(4, 2, 0.5);
  const std::vector<int> xc = {1, 1, 2, 2};
  CHECK_THROWS_AS(overlap_summary(gps, xc, 0), data_error);
  const std::vector<int> short_xc = {1, 2};
  CHECK_THROWS_AS(overlap_summary(gps, short_xc, 10), data_error);
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <vector>

#include "rcgps/simulation.hpp"

using namespace rcgps;

namespace {

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    sab += (a[i] - ma) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("generate_scenario is deterministic given the seed") {
  ScenarioConfig cfg;
  cfg.n_main = 500;
  cfg.n_validation = 100;
  const ScenarioData a = generate_scenario(cfg, 77);
  const ScenarioData b = generate_scenario(cfg, 77);
  const ScenarioData c = generate_scenario(cfg, 78);
  for (const auto& name : a.main.column_names()) {
    REQUIRE(a.main.column(name) == b.main.column(name));
  }
  CHECK(a.main.column("w") != c.main.column("w"));
  CHECK(a.validation.n_rows() == 100);
  // Internal validation: the first rows of the main study, with X observed.
  for (std::size_t i = 0; i < 100; ++i)
    REQUIRE(a.validation.column("x")[i] == a.main.column("x")[i]);
}

TEST_CASE("default calibration gives corr(X, W) of 0.85 within 0.02") {
  ScenarioConfig cfg;
  cfg.n_main = 100000;
  cfg.n_validation = 1;
  const ScenarioData data = generate_scenario(cfg, 5);
  const double corr = correlation(data.main.column("x"), data.main.column("w"));
  CHECK(corr > 0.83);
  CHECK(corr < 0.87);
}

TEST_CASE("weak-correlation setting lowers corr(X, W) to about 0.4") {
  ScenarioConfig cfg;
  cfg.gamma1 = 0.2;
  cfg.n_main = 100000;
  cfg.n_validation = 1;
  const ScenarioData data = generate_scenario(cfg, 5);
  const double corr = correlation(data.main.column("x"), data.main.column("w"));
  CHECK(corr > 0.30);
  CHECK(corr < 0.50);
}

TEST_CASE("covariate distributions match their moments") {
  ScenarioConfig cfg;
  cfg.n_main = 100000;
  cfg.n_validation = 1;
  const ScenarioData data = generate_scenario(cfg, 9);
  const std::size_t n = cfg.n_main;

  // C6 ~ chi^2(1): mean 1, variance 2 (within 5%).
  const auto& c6 = data.main.column("c6");
  double mean = 0.0;
  for (const double v : c6) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (const double v : c6) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  CHECK_THAT(mean, Catch::Matchers::WithinAbs(1.0, 0.05));
  CHECK_THAT(var, Catch::Matchers::WithinAbs(2.0, 0.10));

  // C4 ~ uniform on the integers {-2..2}: mean 0, variance 2.
  const auto& c4 = data.main.column("c4");
  double c4_mean = 0.0, c4_var = 0.0;
  for (const double v : c4) {
    REQUIRE(v == std::floor(v));
    REQUIRE(std::abs(v) <= 2.0);
    c4_mean += v;
  }
  c4_mean /= static_cast<double>(n);
  for (const double v : c4) c4_var += (v - c4_mean) * (v - c4_mean);
  c4_var /= static_cast<double>(n - 1);
  CHECK_THAT(c4_mean, Catch::Matchers::WithinAbs(0.0, 0.05));
  CHECK_THAT(c4_var, Catch::Matchers::WithinAbs(2.0, 0.10));

  // C1, C2, C3: the Table 1 covariance block.
  const auto& c1 = data.main.column("c1");
  const auto& c2 = data.main.column("c2");
  const auto& c3 = data.main.column("c3");
  CHECK_THAT(correlation(c1, c2), Catch::Matchers::WithinAbs(1.0 / std::sqrt(2.0), 0.02));
  CHECK_THAT(correlation(c1, c3), Catch::Matchers::WithinAbs(-1.0 / std::sqrt(2.0), 0.02));
  CHECK_THAT(correlation(c2, c3), Catch::Matchers::WithinAbs(-0.5, 0.02));

  // D1 = C1 by construction.
  REQUIRE(data.main.column("d1") == c1);
}

TEST_CASE("quadratic scenario adds exactly the gamma3 W^2 term") {
  ScenarioConfig linear;
  linear.n_main = 300;
  linear.n_validation = 50;
  ScenarioConfig quadratic = linear;
  quadratic.gamma3 = 0.05;

  const ScenarioData a = generate_scenario(linear, 400);
  const ScenarioData b = generate_scenario(quadratic, 400);
  REQUIRE(a.main.column("w") == b.main.column("w"));
  const auto& w = a.main.column("w");
  for (std::size_t i = 0; i < linear.n_main; ++i) {
    const double expected = a.main.column("x")[i] + 0.05 * w[i] * w[i];
    REQUIRE_THAT(b.main.column("x")[i],
                 Catch::Matchers::WithinRel(expected, 1e-12));
  }
}

TEST_CASE("oracle ATE is null when beta1 is zero") {
  ScenarioConfig cfg;
  cfg.beta1 = 0.0;
  const auto oracle = oracle_ate(cfg, 200000, 3);
  CHECK_THAT(oracle.first, Catch::Matchers::WithinAbs(0.0, 0.3));
  CHECK_THAT(oracle.second, Catch::Matchers::WithinAbs(0.0, 0.3));
}

TEST_CASE("oracle ATE is stable in the sample size") {
  ScenarioConfig cfg;
  std::vector<double> small_draws_1, small_draws_2;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto oracle = oracle_ate(cfg, 100000, seed);
    small_draws_1.push_back(oracle.first);
    small_draws_2.push_back(oracle.second);
  }
  const auto sd_of = [](const std::vector<double>& values) {
    double mean = 0.0;
    for (const double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (const double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
  };
  const double sd1 = sd_of(small_draws_1);
  const double sd2 = sd_of(small_draws_2);
  const auto large = oracle_ate(cfg, 1000000, 99);
  // Combined SE of the (10^5, 10^6) comparison: sqrt(sd^2 + (sd/sqrt(10))^2).
  const double combined1 = std::sqrt(sd1 * sd1 * 1.1);
  const double combined2 = std::sqrt(sd2 * sd2 * 1.1);
  CHECK(std::abs(small_draws_1[0] - large.first) < 3.0 * combined1);
  CHECK(std::abs(small_draws_2[0] - large.second) < 3.0 * combined2);
}

TEST_CASE("oracle ATE rejects cutoffs that empty a category") {
  ScenarioConfig cfg;
  cfg.cutoffs = {-500.0, 1500.0};  // nothing below -500 or above 1500
  CHECK_THROWS_AS(oracle_ate(cfg, 50000, 1), data_error);
}

TEST_CASE("run_replicates is deterministic and schedule-independent") {
  ScenarioConfig cfg;
  cfg.n_main = 400;
  cfg.n_validation = 150;
  cfg.seed = 2024;
  const std::array<double, 2> oracle = {21.0, 20.0};

  setenv("RCGPS_THREADS", "1", 1);
  const auto serial = run_replicates(cfg, EstimatorMethod::subclassification,
                                     RcSpec::rc_with_covariates, 12, oracle);
  setenv("RCGPS_THREADS", "2", 1);
  const auto threaded = run_replicates(cfg, EstimatorMethod::subclassification,
                                       RcSpec::rc_with_covariates, 12, oracle);
  unsetenv("RCGPS_THREADS");
  REQUIRE(serial.estimates[0] == threaded.estimates[0]);
  REQUIRE(serial.estimates[1] == threaded.estimates[1]);
  CHECK(serial.mean_estimate[0] == threaded.mean_estimate[0]);
  CHECK(serial.replicates_run == 12);
}

TEST_CASE("transportability perturbation widens the replicate spread") {
  ScenarioConfig cfg;
  cfg.n_main = 600;
  cfg.n_validation = 200;
  cfg.seed = 31;
  const std::array<double, 2> oracle = {21.0, 20.0};

  ReplicateOptions base;
  ReplicateOptions shaken;
  shaken.perturb_delta_sd = 0.5;
  const auto calm = run_replicates(cfg, EstimatorMethod::subclassification,
                                   RcSpec::rc_with_covariates, 40, oracle, base);
  const auto noisy = run_replicates(cfg, EstimatorMethod::subclassification,
                                    RcSpec::rc_with_covariates, 40, oracle, shaken);
  CHECK(noisy.empirical_sd[0] > calm.empirical_sd[0]);
  CHECK(noisy.empirical_sd[1] > calm.empirical_sd[1]);
}

TEST_CASE("scenario config validation") {
  ScenarioConfig cfg;
  cfg.n_validation = cfg.n_main + 1;
  CHECK_THROWS_AS(cfg.validate(), data_error);
  cfg = ScenarioConfig{};
  cfg.cutoffs = {15.0, -5.0};
  CHECK_THROWS_AS(cfg.validate(), data_error);
  cfg = ScenarioConfig{};
  cfg.w_noise_sd = -1.0;
  CHECK_THROWS_AS(cfg.validate(), data_error);
}

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "rcgps/csv.hpp"
#include "rcgps/rng.hpp"
#include "rcgps/tabular.hpp"

using namespace rcgps;

namespace {

std::filesystem::path temp_csv(const std::string& name, const std::string& body) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("categorize uses left-open right-closed intervals") {
  const CutoffSpec pm_cutoffs({8.0, 10.0});
  CHECK(categorize(std::vector{7.5}, pm_cutoffs) == std::vector{1});
  CHECK(categorize(std::vector{8.0}, pm_cutoffs) == std::vector{1});
  CHECK(categorize(std::vector{8.5}, pm_cutoffs) == std::vector{2});
  CHECK(categorize(std::vector{10.0}, pm_cutoffs) == std::vector{2});
  CHECK(categorize(std::vector{10.5}, pm_cutoffs) == std::vector{3});

  const CutoffSpec table1({-5.0, 15.0});
  CHECK(categorize(std::vector{15.0}, table1) == std::vector{2});
  CHECK(categorize(std::vector{-5.0}, table1) == std::vector{1});
}

TEST_CASE("categorize rejects bad input") {
  CHECK_THROWS_AS(CutoffSpec({}), data_error);
  CHECK_THROWS_AS(CutoffSpec({3.0, 1.0}), data_error);
  const CutoffSpec cutoffs({0.0});
  CHECK_THROWS_AS(
      categorize(std::vector{std::numeric_limits<double>::quiet_NaN()}, cutoffs),
      data_error);
}

TEST_CASE("categorize is monotone and nests under refined cutoffs") {
  RngStream rng(7);
  std::vector<double> x(200);
  for (auto& v : x) v = rng.uniform(-30.0, 30.0);

  const CutoffSpec coarse({-5.0, 15.0});
  const auto cats = categorize(x, coarse);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j)
      if (x[i] <= x[j]) REQUIRE(cats[i] <= cats[j]);

  // Refining with an extra interior threshold maps categories 1,2,3 of the
  // coarse spec onto {1}, {2,3}, {4} of the refined one.
  const CutoffSpec refined({-5.0, 4.0, 15.0});
  const auto fine = categorize(x, refined);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const int coarse_of_fine = fine[i] == 1 ? 1 : (fine[i] <= 3 ? 2 : 3);
    REQUIRE(coarse_of_fine == cats[i]);
  }
}

TEST_CASE("aggregate_regions computes area-weighted means") {
  GridRegionMap map;
  map.entries = {{1, 0, 3.0}};
  auto out = aggregate_regions(std::vector{7.0}, map);
  CHECK(out.at(1) == 7.0);

  map.entries = {{1, 0, 2.0}, {1, 1, 2.0}};
  out = aggregate_regions(std::vector{2.0, 4.0}, map);
  CHECK(out.at(1) == 3.0);

  map.entries = {{5, 0, 1.0}, {5, 1, 3.0}};
  out = aggregate_regions(std::vector{1.0, 5.0}, map);
  CHECK(out.at(5) == 4.0);  // (1*1 + 5*3) / 4
}

TEST_CASE("aggregate_regions rejects degenerate weights and missing grids") {
  GridRegionMap map;
  map.entries = {{1, 0, 0.0}, {1, 1, 0.0}};
  CHECK_THROWS_AS(aggregate_regions(std::vector{1.0, 2.0}, map), data_error);

  map.entries = {{1, 5, 1.0}};
  CHECK_THROWS_AS(aggregate_regions(std::vector{1.0}, map), data_error);
}

TEST_CASE("aggregate_regions is invariant to rescaling weights within a region") {
  RngStream rng(11);
  std::vector<double> values(10);
  for (auto& v : values) v = rng.uniform(-10.0, 10.0);
  GridRegionMap map, scaled;
  for (std::size_t g = 0; g < values.size(); ++g) {
    const std::int64_t region = g < 4 ? 1 : 2;
    const double weight = rng.uniform(0.1, 5.0);
    map.entries.push_back({region, g, weight});
    scaled.entries.push_back({region, g, weight * (region == 1 ? 13.0 : 0.25)});
  }
  const auto a = aggregate_regions(values, map);
  const auto b = aggregate_regions(values, scaled);
  for (const auto& [region, value] : a)
    CHECK_THAT(b.at(region), Catch::Matchers::WithinRel(value, 1e-12));
}

TEST_CASE("csv reads a small file") {
  const auto path = temp_csv("rcgps_small.csv", "a,b\n1,2\n3,4\n5,6\n");
  const TabularDataset data = read_csv(path.string());
  CHECK(data.n_rows() == 3);
  CHECK(data.n_columns() == 2);
  CHECK(data.column("a") == std::vector{1.0, 3.0, 5.0});
  std::filesystem::remove(path);
}

TEST_CASE("csv write-then-read round-trips exactly") {
  RngStream rng(3);
  TabularDataset data;
  for (int c = 0; c < 6; ++c) {
    std::vector<double> col(100);
    for (auto& v : col) v = rng.normal(0.0, 1e3) * std::pow(10.0, rng.uniform(-8, 8));
    data.add_column("col" + std::to_string(c), std::move(col));
  }
  const auto path = std::filesystem::temp_directory_path() / "rcgps_roundtrip.csv";
  write_csv(data, path.string());
  const TabularDataset back = read_csv(path.string());
  REQUIRE(back.n_rows() == data.n_rows());
  for (const auto& name : data.column_names()) {
    const auto& original = data.column(name);
    const auto& reread = back.column(name);
    for (std::size_t i = 0; i < original.size(); ++i)
      REQUIRE(original[i] == reread[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("csv errors carry row and column locations") {
  const auto na = temp_csv("rcgps_na.csv", "a,b\n1,2\n3,NA\n");
  CHECK_THROWS_WITH(read_csv(na.string()),
                    Catch::Matchers::ContainsSubstring("row 3") &&
                        Catch::Matchers::ContainsSubstring("'b'"));
  std::filesystem::remove(na);

  const auto ragged = temp_csv("rcgps_ragged.csv", "a,b\n1,2\n3\n");
  CHECK_THROWS_WITH(read_csv(ragged.string()),
                    Catch::Matchers::ContainsSubstring("ragged row 3"));
  std::filesystem::remove(ragged);

  const auto dup = temp_csv("rcgps_dup.csv", "a,a\n1,2\n");
  CHECK_THROWS_WITH(read_csv(dup.string()),
                    Catch::Matchers::ContainsSubstring("duplicate header"));
  std::filesystem::remove(dup);
}

TEST_CASE("dataset validates roles") {
  TabularDataset data;
  data.add_column("y", {1.0, 2.0}, ColumnRole::outcome);
  data.add_column("xc", {1.0, 2.0}, ColumnRole::categorical_exposure);
  CHECK_NOTHROW(data.validate());

  TabularDataset bad;
  bad.add_column("y", {1.0, std::numeric_limits<double>::infinity()},
                 ColumnRole::outcome);
  CHECK_THROWS_AS(bad.validate(), data_error);

  TabularDataset fractional;
  fractional.add_column("xc", {1.5, 2.0}, ColumnRole::categorical_exposure);
  CHECK_THROWS_AS(fractional.validate(), data_error);

  CHECK_THROWS_AS(data.column("missing"), schema_error);
  CHECK_THROWS_AS(data.add_column("y", {0.0, 0.0}), schema_error);
  CHECK_THROWS_AS(data.add_column("short", {0.0}), data_error);
}

TEST_CASE("dataset subset preserves order and roles") {
  TabularDataset data;
  data.add_column("y", {10.0, 20.0, 30.0}, ColumnRole::outcome);
  data.add_column("w", {1.0, 2.0, 3.0}, ColumnRole::error_prone_exposure);
  const std::vector<std::size_t> rows = {2, 0, 2};
  const TabularDataset picked = data.subset(rows);
  CHECK(picked.column("y") == std::vector{30.0, 10.0, 30.0});
  CHECK(picked.single_column_with_role(ColumnRole::outcome) == "y");
}

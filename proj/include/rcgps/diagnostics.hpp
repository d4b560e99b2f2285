#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rcgps/errors.hpp"
#include "rcgps/estimators.hpp"
#include "rcgps/gps.hpp"
#include "rcgps/tabular.hpp"

namespace rcgps {

// How the post-implementation groups are formed when computing balance.
struct BalanceDesign {
  enum class Kind { none, weights, subclasses, matched } kind = Kind::none;
  std::vector<double> weights;          // IPTW weights, aligned with units
  const GpsMatrix* gps = nullptr;       // for subclass construction
  int n_subclasses = 0;
  const MatchAssignment* assignment = nullptr;
};

namespace detail {

// Pooled unweighted SD of the covariate over the full pre-design sample.
inline double pooled_sd(std::span<const double> covariate) {
  double mean = 0.0;
  for (const double v : covariate) mean += v;
  mean /= static_cast<double>(covariate.size());
  double ss = 0.0;
  for (const double v : covariate) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(covariate.size() - 1));
}

inline double weighted_group_difference(std::span<const double> covariate,
                                        std::span<const int> xc, int x,
                                        std::span<const double> weights) {
  double sum_in = 0.0, w_in = 0.0, sum_out = 0.0, w_out = 0.0;
  for (std::size_t j = 0; j < covariate.size(); ++j) {
    const double w = weights.empty() ? 1.0 : weights[j];
    if (xc[j] == x) {
      sum_in += w * covariate[j];
      w_in += w;
    } else {
      sum_out += w * covariate[j];
      w_out += w;
    }
  }
  if (w_in <= 0.0 || w_out <= 0.0)
    throw data_error("balance: a group is empty for category " +
                     std::to_string(x));
  return sum_in / w_in - sum_out / w_out;
}

}  // namespace detail

// Absolute standardized bias of one covariate for the binary split
// X_c = x vs X_c != x: |group mean difference| / pooled full-sample SD.
// The denominator always comes from the unweighted pre-design sample.
inline double asb(std::span<const double> covariate, std::span<const int> xc,
                  int x, const BalanceDesign& design = {}) {
  if (covariate.size() != xc.size())
    throw data_error("balance: covariate and exposure lengths differ");
  const double sd = detail::pooled_sd(covariate);
  if (sd <= 0.0)
    throw data_error("balance: covariate is constant (zero pooled SD)");

  switch (design.kind) {
    case BalanceDesign::Kind::none:
      return std::abs(detail::weighted_group_difference(covariate, xc, x, {})) / sd;

    case BalanceDesign::Kind::weights:
      return std::abs(detail::weighted_group_difference(covariate, xc, x,
                                                        design.weights)) /
             sd;

    case BalanceDesign::Kind::subclasses: {
      if (design.gps == nullptr || design.n_subclasses < 1)
        throw data_error("balance: subclass design needs a GPS and K");
      const std::size_t n_units = covariate.size();
      std::vector<double> element(n_units);
      for (std::size_t j = 0; j < n_units; ++j)
        element[j] = design.gps->probs(static_cast<Eigen::Index>(j), x - 1);
      const SubclassSpec spec =
          make_subclass_spec(*design.gps, design.n_subclasses);
      const auto [labels, merges] = detail::merged_subclass_labels(
          element, xc, x, spec.boundaries[static_cast<std::size_t>(x - 1)],
          design.n_subclasses);
      (void)merges;
      // Within-subclass mean differences averaged with N_k/N weights;
      // subclasses lacking a comparison group contribute a zero difference.
      double diff = 0.0;
      for (int k = 1; k <= design.n_subclasses; ++k) {
        double sum_in = 0.0, sum_out = 0.0;
        std::size_t n_in = 0, n_out = 0, n_k = 0;
        for (std::size_t j = 0; j < n_units; ++j) {
          if (labels[j] != k) continue;
          ++n_k;
          if (xc[j] == x) {
            sum_in += covariate[j];
            ++n_in;
          } else {
            sum_out += covariate[j];
            ++n_out;
          }
        }
        if (n_k == 0 || n_in == 0 || n_out == 0) continue;
        const double weight =
            static_cast<double>(n_k) / static_cast<double>(n_units);
        diff += weight * (sum_in / static_cast<double>(n_in) -
                          sum_out / static_cast<double>(n_out));
      }
      return std::abs(diff) / sd;
    }

    case BalanceDesign::Kind::matched: {
      if (design.assignment == nullptr)
        throw data_error("balance: matched design needs a match assignment");
      const auto& donors =
          design.assignment->donors[static_cast<std::size_t>(x - 1)];
      if (donors.size() != covariate.size())
        throw data_error("balance: match assignment does not align with data");
      // On the replicated matched sample for element x, compare the donated
      // covariates between rows originating from X_c = x and from X_c != x.
      double sum_in = 0.0, sum_out = 0.0;
      std::size_t n_in = 0, n_out = 0;
      for (std::size_t j = 0; j < donors.size(); ++j) {
        if (xc[j] == x) {
          sum_in += covariate[donors[j]];
          ++n_in;
        } else {
          sum_out += covariate[donors[j]];
          ++n_out;
        }
      }
      if (n_in == 0 || n_out == 0)
        throw data_error("balance: a group is empty for category " +
                         std::to_string(x));
      return std::abs(sum_in / static_cast<double>(n_in) -
                      sum_out / static_cast<double>(n_out)) /
             sd;
    }
  }
  throw data_error("balance: unknown design");
}

struct BalanceEntry {
  std::string confounder;
  int category = 0;
  double asb_before = 0.0;
  double asb_after = 0.0;
};

struct BalanceReport {
  std::string method;
  std::vector<BalanceEntry> entries;
  double kept_fraction = 1.0;  // after trimming
};

// ASB before and after one implementation, for every confounder and every
// exposure category.
inline BalanceReport balance_report(const TabularDataset& data,
                                    std::span<const int> xc,
                                    const GpsMatrix& gps,
                                    EstimatorMethod method,
                                    const BalanceDesign& after_design) {
  BalanceReport report;
  report.method = method_name(method);
  const auto confounders = data.columns_with_role(ColumnRole::confounder);
  for (const auto& name : confounders) {
    const auto& covariate = data.column(name);
    for (int x = 1; x <= gps.n_categories(); ++x) {
      BalanceEntry entry;
      entry.confounder = name;
      entry.category = x;
      entry.asb_before = asb(covariate, xc, x, {});
      entry.asb_after = asb(covariate, xc, x, after_design);
      report.entries.push_back(entry);
    }
  }
  return report;
}

struct OverlapGroupSummary {
  int element = 0;  // GPS element x
  int group = 0;    // exposure group g
  double min = 0.0;
  double max = 0.0;
  std::vector<std::size_t> histogram;
};

struct OverlapSummary {
  int bins = 0;
  std::vector<OverlapGroupSummary> groups;
  // Per element: fraction of all units inside the cross-group range
  // intersection (1.0 = complete overlap).
  std::vector<double> intersection_fraction;
};

// Histograms of each GPS element over [0,1] by exposure group, the per-group
// ranges, and the share of units inside the cross-group range intersection.
inline OverlapSummary overlap_summary(const GpsMatrix& gps,
                                      std::span<const int> xc, int bins = 30) {
  if (bins < 1) throw data_error("overlap summary needs at least one bin");
  const std::size_t n_units = gps.n_units();
  if (xc.size() != n_units)
    throw data_error("overlap summary: exposure does not align with GPS rows");
  const int n_cat = gps.n_categories();

  OverlapSummary summary;
  summary.bins = bins;
  for (int x = 1; x <= n_cat; ++x) {
    std::vector<double> group_min(static_cast<std::size_t>(n_cat),
                                  std::numeric_limits<double>::infinity());
    std::vector<double> group_max(static_cast<std::size_t>(n_cat),
                                  -std::numeric_limits<double>::infinity());
    std::vector<OverlapGroupSummary> groups(static_cast<std::size_t>(n_cat));
    for (int g = 1; g <= n_cat; ++g) {
      auto& entry = groups[static_cast<std::size_t>(g - 1)];
      entry.element = x;
      entry.group = g;
      entry.histogram.assign(static_cast<std::size_t>(bins), 0);
    }
    for (std::size_t j = 0; j < n_units; ++j) {
      const double p = gps.probs(static_cast<Eigen::Index>(j), x - 1);
      const auto g = static_cast<std::size_t>(xc[j] - 1);
      group_min[g] = std::min(group_min[g], p);
      group_max[g] = std::max(group_max[g], p);
      auto bin = static_cast<std::size_t>(p * bins);
      if (bin >= static_cast<std::size_t>(bins))
        bin = static_cast<std::size_t>(bins) - 1;  // p == 1 lands in the last bin
      ++groups[g].histogram[bin];
    }
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    for (int g = 0; g < n_cat; ++g) {
      const auto gi = static_cast<std::size_t>(g);
      if (!std::isfinite(group_min[gi])) continue;
      groups[gi].min = group_min[gi];
      groups[gi].max = group_max[gi];
      lower = std::max(lower, group_min[gi]);
      upper = std::min(upper, group_max[gi]);
    }
    std::size_t inside = 0;
    for (std::size_t j = 0; j < n_units; ++j) {
      const double p = gps.probs(static_cast<Eigen::Index>(j), x - 1);
      if (p >= lower && p <= upper) ++inside;
    }
    summary.intersection_fraction.push_back(
        lower <= upper ? static_cast<double>(inside) / static_cast<double>(n_units)
                       : 0.0);
    for (auto& entry : groups) summary.groups.push_back(std::move(entry));
  }
  return summary;
}

}  // namespace rcgps

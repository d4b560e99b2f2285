#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rcgps/errors.hpp"
#include "rcgps/gps.hpp"

namespace rcgps {

enum class EstimatorMethod { subclassification, iptw, matching };

inline const char* method_name(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::subclassification: return "subclassification";
    case EstimatorMethod::iptw: return "iptw";
    case EstimatorMethod::matching: return "matching";
  }
  return "unknown";
}

// Per-category estimates of the mean potential outcome E[Y(x)].
struct PotentialOutcomeEstimates {
  EstimatorMethod method = EstimatorMethod::subclassification;
  std::vector<double> means;  // index x-1 holds E[Y(x)]
  // Auxiliary diagnostics, depending on the method.
  std::vector<double> effective_sample_sizes;  // per category
  double capped_weight_fraction = 0.0;         // IPTW only
  int merged_subclasses = 0;                   // subclassification only
};

// Quantile-based subclass boundaries per GPS element.
struct SubclassSpec {
  int n_subclasses = 0;
  // boundaries[x-1] holds the interior quantile values q_{x,1} .. q_{x,K-1}.
  std::vector<std::vector<double>> boundaries;
};

namespace detail {

// Linear-interpolation sample quantile (R type 7) of already-sorted values.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  const double h = q * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

// Subclass labels for one GPS element: unit j lands in subclass k when
// q_{k-1} <= p_j < q_k, with q_0 = -inf and q_K = +inf.
inline std::vector<int> subclass_labels(std::span<const double> element,
                                        const std::vector<double>& boundaries) {
  std::vector<int> labels(element.size());
  for (std::size_t j = 0; j < element.size(); ++j) {
    const auto it =
        std::upper_bound(boundaries.begin(), boundaries.end(), element[j]);
    labels[j] = static_cast<int>(it - boundaries.begin()) + 1;
  }
  return labels;
}

// Subclass labels for one element with empty treated cells collapsed into
// the nearest subclass that has category-x units; equidistant neighbors
// resolve to the one above. Returns the merged labels and the merge count.
inline std::pair<std::vector<int>, int> merged_subclass_labels(
    std::span<const double> element, std::span<const int> xc, int category,
    const std::vector<double>& boundaries, int n_subclasses) {
  std::vector<int> labels = subclass_labels(element, boundaries);
  std::vector<std::size_t> n_all(static_cast<std::size_t>(n_subclasses), 0);
  std::vector<std::size_t> n_treated(static_cast<std::size_t>(n_subclasses), 0);
  for (std::size_t j = 0; j < labels.size(); ++j) {
    ++n_all[static_cast<std::size_t>(labels[j] - 1)];
    if (xc[j] == category) ++n_treated[static_cast<std::size_t>(labels[j] - 1)];
  }

  int merges = 0;
  for (;;) {
    int empty = -1;
    for (int k = 0; k < n_subclasses; ++k)
      if (n_all[static_cast<std::size_t>(k)] > 0 &&
          n_treated[static_cast<std::size_t>(k)] == 0) {
        empty = k;
        break;
      }
    if (empty < 0) break;

    int best = -1;
    int best_distance = std::numeric_limits<int>::max();
    for (int k = 0; k < n_subclasses; ++k) {
      if (n_treated[static_cast<std::size_t>(k)] == 0) continue;
      const int distance = std::abs(k - empty);
      if (distance < best_distance ||
          (distance == best_distance && k > best)) {
        best = k;
        best_distance = distance;
      }
    }
    if (best < 0)
      throw data_error("subclassification: category " + std::to_string(category) +
                       " has no observations in any subclass");
    for (auto& label : labels)
      if (label == empty + 1) label = best + 1;
    n_all[static_cast<std::size_t>(best)] += n_all[static_cast<std::size_t>(empty)];
    n_all[static_cast<std::size_t>(empty)] = 0;
    ++merges;
  }
  return {std::move(labels), merges};
}

}  // namespace detail

struct SubclassificationOptions {
  // Strict mode errors on an empty (subclass, category) cell instead of
  // merging it into the nearest populated neighbor.
  bool strict = false;
};

inline SubclassSpec make_subclass_spec(const GpsMatrix& gps, int n_subclasses) {
  if (n_subclasses < 1)
    throw data_error("subclassification needs at least one subclass");
  SubclassSpec spec;
  spec.n_subclasses = n_subclasses;
  spec.boundaries.resize(static_cast<std::size_t>(gps.n_categories()));
  for (int x = 0; x < gps.n_categories(); ++x) {
    std::vector<double> sorted(gps.n_units());
    for (std::size_t j = 0; j < sorted.size(); ++j)
      sorted[j] = gps.probs(static_cast<Eigen::Index>(j), x);
    std::sort(sorted.begin(), sorted.end());
    auto& bounds = spec.boundaries[static_cast<std::size_t>(x)];
    for (int k = 1; k < n_subclasses; ++k)
      bounds.push_back(detail::sorted_quantile(
          sorted, static_cast<double>(k) / static_cast<double>(n_subclasses)));
  }
  return spec;
}

// Subclassification on quantiles of each GPS element:
//   E[Y(x)] = sum_k (N_k / N) * mean(Y | subclass k, X_c = x),
// where N_k counts every unit in subclass k regardless of category.
inline PotentialOutcomeEstimates estimate_subclassification(
    std::span<const double> y, std::span<const int> xc, const GpsMatrix& gps,
    int n_subclasses, const SubclassificationOptions& options = {}) {
  const std::size_t n_units = gps.n_units();
  if (y.size() != n_units || xc.size() != n_units)
    throw data_error("subclassification: input lengths do not match GPS rows");

  const SubclassSpec spec = make_subclass_spec(gps, n_subclasses);
  PotentialOutcomeEstimates out;
  out.method = EstimatorMethod::subclassification;
  out.means.resize(static_cast<std::size_t>(gps.n_categories()));
  out.effective_sample_sizes.resize(out.means.size());

  for (int x = 1; x <= gps.n_categories(); ++x) {
    std::vector<double> element(n_units);
    for (std::size_t j = 0; j < n_units; ++j)
      element[j] = gps.probs(static_cast<Eigen::Index>(j), x - 1);
    const auto& boundaries = spec.boundaries[static_cast<std::size_t>(x - 1)];

    std::size_t n_treated_total = 0;
    for (std::size_t j = 0; j < n_units; ++j)
      if (xc[j] == x) ++n_treated_total;
    if (n_treated_total == 0)
      throw data_error("subclassification: category " + std::to_string(x) +
                       " has no observations");

    if (options.strict) {
      const std::vector<int> raw = detail::subclass_labels(element, boundaries);
      std::vector<std::size_t> n_all(static_cast<std::size_t>(n_subclasses), 0);
      std::vector<std::size_t> n_treated(static_cast<std::size_t>(n_subclasses), 0);
      for (std::size_t j = 0; j < n_units; ++j) {
        ++n_all[static_cast<std::size_t>(raw[j] - 1)];
        if (xc[j] == x) ++n_treated[static_cast<std::size_t>(raw[j] - 1)];
      }
      for (int k = 0; k < n_subclasses; ++k)
        if (n_all[static_cast<std::size_t>(k)] > 0 &&
            n_treated[static_cast<std::size_t>(k)] == 0)
          throw data_error("subclassification: empty cell (subclass " +
                           std::to_string(k + 1) + ", category " +
                           std::to_string(x) + ") in strict mode");
    }

    const auto [labels, merges] = detail::merged_subclass_labels(
        element, xc, x, boundaries, n_subclasses);
    out.merged_subclasses += merges;

    std::vector<std::size_t> n_all(static_cast<std::size_t>(n_subclasses), 0);
    std::vector<std::size_t> n_treated(static_cast<std::size_t>(n_subclasses), 0);
    std::vector<double> treated_sum(static_cast<std::size_t>(n_subclasses), 0.0);
    for (std::size_t j = 0; j < n_units; ++j) {
      const auto k = static_cast<std::size_t>(labels[j] - 1);
      ++n_all[k];
      if (xc[j] == x) {
        ++n_treated[k];
        treated_sum[k] += y[j];
      }
    }
    double estimate = 0.0;
    for (int k = 0; k < n_subclasses; ++k) {
      const auto ki = static_cast<std::size_t>(k);
      if (n_all[ki] == 0) continue;
      const double weight =
          static_cast<double>(n_all[ki]) / static_cast<double>(n_units);
      estimate += weight * (treated_sum[ki] / static_cast<double>(n_treated[ki]));
    }
    out.means[static_cast<std::size_t>(x - 1)] = estimate;
    out.effective_sample_sizes[static_cast<std::size_t>(x - 1)] =
        static_cast<double>(n_treated_total);
  }
  return out;
}

struct IptwOptions {
  double weight_cap = 10.0;
  // Horvitz-Thompson by default; Hajek divides by the within-category mean
  // of the (capped) weights instead of using the raw 1/N average.
  bool hajek = false;
};

// Inverse probability weighting on the unit's own GPS element:
//   E[Y(x)] = (1/N) sum_j Y_j I(X_c,j = x) min(1/p(x|c_j), cap).
inline PotentialOutcomeEstimates estimate_iptw(std::span<const double> y,
                                               std::span<const int> xc,
                                               const GpsMatrix& gps,
                                               const IptwOptions& options = {}) {
  const std::size_t n_units = gps.n_units();
  if (y.size() != n_units || xc.size() != n_units)
    throw data_error("iptw: input lengths do not match GPS rows");
  if (options.weight_cap <= 0.0)
    throw data_error("iptw: weight cap must be positive");

  const int n_cat = gps.n_categories();
  std::vector<double> weighted_sum(static_cast<std::size_t>(n_cat), 0.0);
  std::vector<double> weight_total(static_cast<std::size_t>(n_cat), 0.0);
  std::vector<double> weight_sq(static_cast<std::size_t>(n_cat), 0.0);
  std::size_t n_capped = 0;

  for (std::size_t j = 0; j < n_units; ++j) {
    const int x = xc[j];
    const double p = gps.probs(static_cast<Eigen::Index>(j), x - 1);
    if (p <= 0.0)
      throw positivity_error("iptw: unit " + std::to_string(j + 1) +
                             " has zero probability for its observed category " +
                             std::to_string(x));
    double weight = 1.0 / p;
    if (weight > options.weight_cap) {
      weight = options.weight_cap;
      ++n_capped;
    }
    weighted_sum[static_cast<std::size_t>(x - 1)] += weight * y[j];
    weight_total[static_cast<std::size_t>(x - 1)] += weight;
    weight_sq[static_cast<std::size_t>(x - 1)] += weight * weight;
  }

  PotentialOutcomeEstimates out;
  out.method = EstimatorMethod::iptw;
  out.means.resize(static_cast<std::size_t>(n_cat));
  out.effective_sample_sizes.resize(static_cast<std::size_t>(n_cat));
  out.capped_weight_fraction =
      static_cast<double>(n_capped) / static_cast<double>(n_units);
  for (int x = 0; x < n_cat; ++x) {
    const auto xi = static_cast<std::size_t>(x);
    if (weight_total[xi] == 0.0)
      throw data_error("iptw: category " + std::to_string(x + 1) +
                       " has no observations");
    out.means[xi] = options.hajek
                        ? weighted_sum[xi] / weight_total[xi]
                        : weighted_sum[xi] / static_cast<double>(n_units);
    out.effective_sample_sizes[xi] =
        weight_total[xi] * weight_total[xi] / weight_sq[xi];
  }
  return out;
}

// Donor indices per target category: assignment[x-1][j] is the unit with
// X_c = x donating its outcome to unit j.
struct MatchAssignment {
  std::vector<std::vector<std::size_t>> donors;
};

// One-to-one nearest-neighbor matching with replacement on the scalar GPS
// element p(x|c). Exact distance ties resolve to the smallest donor index.
inline std::pair<PotentialOutcomeEstimates, MatchAssignment> estimate_matching(
    std::span<const double> y, std::span<const int> xc, const GpsMatrix& gps) {
  const std::size_t n_units = gps.n_units();
  if (y.size() != n_units || xc.size() != n_units)
    throw data_error("matching: input lengths do not match GPS rows");
  const int n_cat = gps.n_categories();

  PotentialOutcomeEstimates out;
  out.method = EstimatorMethod::matching;
  out.means.resize(static_cast<std::size_t>(n_cat));
  out.effective_sample_sizes.resize(static_cast<std::size_t>(n_cat));
  MatchAssignment assignment;
  assignment.donors.resize(static_cast<std::size_t>(n_cat));

  for (int x = 1; x <= n_cat; ++x) {
    // Candidate donors, deduplicated by element value keeping the smallest
    // index, so binary search plus a left/right comparison applies the
    // nearest-neighbor and tie rules exactly.
    std::vector<std::pair<double, std::size_t>> donors;
    for (std::size_t j = 0; j < n_units; ++j)
      if (xc[j] == x)
        donors.emplace_back(gps.probs(static_cast<Eigen::Index>(j), x - 1), j);
    if (donors.empty())
      throw data_error("matching: no donors in category " + std::to_string(x));
    std::sort(donors.begin(), donors.end());
    std::vector<std::pair<double, std::size_t>> unique_donors;
    for (const auto& d : donors)
      if (unique_donors.empty() || unique_donors.back().first != d.first)
        unique_donors.push_back(d);

    auto& donated = assignment.donors[static_cast<std::size_t>(x - 1)];
    donated.resize(n_units);
    double total = 0.0;
    std::vector<std::size_t> usage_count(n_units, 0);
    for (std::size_t j = 0; j < n_units; ++j) {
      const double target = gps.probs(static_cast<Eigen::Index>(j), x - 1);
      const auto it = std::lower_bound(
          unique_donors.begin(), unique_donors.end(), target,
          [](const auto& d, double v) { return d.first < v; });
      std::size_t chosen;
      if (it != unique_donors.end() && it->first == target) {
        chosen = it->second;
      } else if (it == unique_donors.begin()) {
        chosen = it->second;
      } else if (it == unique_donors.end()) {
        chosen = (it - 1)->second;
      } else {
        const double right = it->first - target;
        const double left = target - (it - 1)->first;
        if (left < right)
          chosen = (it - 1)->second;
        else if (right < left)
          chosen = it->second;
        else
          chosen = std::min((it - 1)->second, it->second);
      }
      donated[j] = chosen;
      ++usage_count[chosen];
      total += y[chosen];
    }
    out.means[static_cast<std::size_t>(x - 1)] =
        total / static_cast<double>(n_units);
    // Kish effective size of the implied donor weights.
    double sum_sq = 0.0;
    for (const std::size_t count : usage_count)
      sum_sq += static_cast<double>(count) * static_cast<double>(count);
    out.effective_sample_sizes[static_cast<std::size_t>(x - 1)] =
        static_cast<double>(n_units) * static_cast<double>(n_units) / sum_sq;
  }
  return {out, assignment};
}

}  // namespace rcgps

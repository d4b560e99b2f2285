#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rcgps/errors.hpp"

namespace rcgps {

enum class ColumnRole {
  none,
  outcome,
  true_exposure,
  error_prone_exposure,
  categorical_exposure,
  confounder,
  calibration_covariate,
  offset,
  stratum,
  region_id,
  weight,
};

inline const char* role_name(ColumnRole role) {
  switch (role) {
    case ColumnRole::none: return "none";
    case ColumnRole::outcome: return "outcome";
    case ColumnRole::true_exposure: return "true_exposure";
    case ColumnRole::error_prone_exposure: return "error_prone_exposure";
    case ColumnRole::categorical_exposure: return "categorical_exposure";
    case ColumnRole::confounder: return "confounder";
    case ColumnRole::calibration_covariate: return "calibration_covariate";
    case ColumnRole::offset: return "offset";
    case ColumnRole::stratum: return "stratum";
    case ColumnRole::region_id: return "region_id";
    case ColumnRole::weight: return "weight";
  }
  return "none";
}

inline ColumnRole role_from_name(const std::string& name) {
  static const std::map<std::string, ColumnRole> lookup = {
      {"none", ColumnRole::none},
      {"outcome", ColumnRole::outcome},
      {"true_exposure", ColumnRole::true_exposure},
      {"error_prone_exposure", ColumnRole::error_prone_exposure},
      {"categorical_exposure", ColumnRole::categorical_exposure},
      {"confounder", ColumnRole::confounder},
      {"calibration_covariate", ColumnRole::calibration_covariate},
      {"offset", ColumnRole::offset},
      {"stratum", ColumnRole::stratum},
      {"region_id", ColumnRole::region_id},
      {"weight", ColumnRole::weight},
  };
  const auto it = lookup.find(name);
  if (it == lookup.end()) throw schema_error("unknown column role '" + name + "'");
  return it->second;
}

// Column-named numeric table. Immutable by convention after loading: the
// analysis operations take const references and return new objects.
class TabularDataset {
public:
  TabularDataset() = default;

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_columns() const { return names_.size(); }
  const std::vector<std::string>& column_names() const { return names_; }

  bool has_column(const std::string& name) const {
    return index_.count(name) > 0;
  }

  const std::vector<double>& column(const std::string& name) const {
    const auto it = index_.find(name);
    if (it == index_.end())
      throw schema_error("dataset has no column named '" + name + "'");
    return columns_[it->second];
  }

  void add_column(const std::string& name, std::vector<double> values,
                  ColumnRole role = ColumnRole::none) {
    if (index_.count(name) > 0)
      throw schema_error("duplicate column name '" + name + "'");
    if (!names_.empty() && values.size() != n_rows_)
      throw data_error("column '" + name + "' has " +
                       std::to_string(values.size()) + " rows, expected " +
                       std::to_string(n_rows_));
    if (names_.empty()) n_rows_ = values.size();
    index_[name] = names_.size();
    names_.push_back(name);
    columns_.push_back(std::move(values));
    if (role != ColumnRole::none) set_role(name, role);
  }

  void set_role(const std::string& name, ColumnRole role) {
    if (!has_column(name))
      throw schema_error("cannot assign role to missing column '" + name + "'");
    if (role == ColumnRole::none)
      roles_.erase(name);
    else
      roles_[name] = role;
  }

  ColumnRole role_of(const std::string& name) const {
    const auto it = roles_.find(name);
    return it == roles_.end() ? ColumnRole::none : it->second;
  }

  // Columns carrying `role`, in dataset column order.
  std::vector<std::string> columns_with_role(ColumnRole role) const {
    std::vector<std::string> out;
    for (const auto& name : names_) {
      const auto it = roles_.find(name);
      if (it != roles_.end() && it->second == role) out.push_back(name);
    }
    return out;
  }

  // The unique column with `role`; throws when absent or ambiguous.
  const std::string& single_column_with_role(ColumnRole role) const {
    const std::string* found = nullptr;
    for (const auto& name : names_) {
      const auto it = roles_.find(name);
      if (it != roles_.end() && it->second == role) {
        if (found)
          throw schema_error(std::string("multiple columns carry role '") +
                             role_name(role) + "': '" + *found + "' and '" +
                             name + "'");
        found = &name;
      }
    }
    if (!found)
      throw schema_error(std::string("no column carries role '") +
                         role_name(role) + "'");
    return *found;
  }

  // Enforces the dataset invariants: equal column lengths are maintained by
  // construction; role-bearing columns must be finite, and categorical /
  // stratum / region columns must hold positive integers.
  void validate() const {
    for (const auto& [name, role] : roles_) {
      const auto& col = column(name);
      for (std::size_t i = 0; i < col.size(); ++i) {
        if (!std::isfinite(col[i]))
          throw data_error("non-finite value in role-bearing column '" + name +
                           "' at row " + std::to_string(i + 1));
        if (role == ColumnRole::categorical_exposure ||
            role == ColumnRole::stratum || role == ColumnRole::region_id) {
          if (col[i] != std::floor(col[i]) ||
              (role != ColumnRole::region_id && col[i] < 1.0))
            throw data_error("column '" + name + "' (role " + role_name(role) +
                             ") must hold positive integers; row " +
                             std::to_string(i + 1) + " is " +
                             std::to_string(col[i]));
        }
      }
    }
  }

  // Row subset (with repetition allowed), preserving column order and roles.
  TabularDataset subset(std::span<const std::size_t> rows) const {
    TabularDataset out;
    out.n_rows_ = rows.size();
    out.names_ = names_;
    out.index_ = index_;
    out.roles_ = roles_;
    out.columns_.reserve(columns_.size());
    for (const auto& col : columns_) {
      std::vector<double> picked(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) picked[i] = col[rows[i]];
      out.columns_.push_back(std::move(picked));
    }
    return out;
  }

  TabularDataset head(std::size_t count) const {
    std::vector<std::size_t> rows(std::min(count, n_rows_));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return subset(rows);
  }

private:
  std::size_t n_rows_ = 0;
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, ColumnRole> roles_;
};

// Strictly increasing thresholds k_1 < ... < k_{n-1} defining n categories.
struct CutoffSpec {
  std::vector<double> thresholds;

  explicit CutoffSpec(std::vector<double> t) : thresholds(std::move(t)) {
    if (thresholds.empty())
      throw data_error("cutoff spec needs at least one threshold");
    for (std::size_t i = 0; i + 1 < thresholds.size(); ++i)
      if (!(thresholds[i] < thresholds[i + 1]))
        throw data_error("cutoff thresholds must be strictly increasing");
    for (double t_i : thresholds)
      if (!std::isfinite(t_i)) throw data_error("cutoff thresholds must be finite");
  }

  int n_categories() const { return static_cast<int>(thresholds.size()) + 1; }
};

// Left-open / right-closed binning: category c iff k_{c-1} < x <= k_c with
// k_0 = -inf and k_n = +inf, so a value equal to a threshold falls below it.
inline std::vector<int> categorize(std::span<const double> x,
                                   const CutoffSpec& cutoffs) {
  std::vector<int> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]))
      throw data_error("categorize: non-finite value at row " +
                       std::to_string(i + 1));
    const auto& t = cutoffs.thresholds;
    // First threshold >= x gives the category; lower_bound finds it since
    // the interval (k_{c-1}, k_c] contains x exactly when k_c is that value.
    const auto it = std::lower_bound(t.begin(), t.end(), x[i]);
    out[i] = static_cast<int>(it - t.begin()) + 1;
  }
  return out;
}

// (region, grid, area weight) triples; grid ids index into the value vector
// passed to aggregate_regions. Area weights are consumed precomputed.
struct GridRegionMap {
  struct Entry {
    std::int64_t region_id;
    std::size_t grid_id;
    double area_weight;
  };
  std::vector<Entry> entries;
};

// Area-weighted mean per region: sum(w*v)/sum(w).
inline std::map<std::int64_t, double> aggregate_regions(
    std::span<const double> grid_values, const GridRegionMap& map) {
  std::map<std::int64_t, double> weighted_sum;
  std::map<std::int64_t, double> weight_sum;
  for (const auto& e : map.entries) {
    if (e.grid_id >= grid_values.size())
      throw data_error("grid id " + std::to_string(e.grid_id) +
                       " has no value (only " +
                       std::to_string(grid_values.size()) + " grid values)");
    if (e.area_weight < 0.0 || !std::isfinite(e.area_weight))
      throw data_error("negative or non-finite area weight for region " +
                       std::to_string(e.region_id));
    weighted_sum[e.region_id] += e.area_weight * grid_values[e.grid_id];
    weight_sum[e.region_id] += e.area_weight;
  }
  std::map<std::int64_t, double> out;
  for (const auto& [region, total] : weight_sum) {
    if (total <= 0.0)
      throw data_error("region " + std::to_string(region) +
                       " has degenerate (all-zero) area weights");
    out[region] = weighted_sum[region] / total;
  }
  return out;
}

}  // namespace rcgps

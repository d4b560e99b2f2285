#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rcgps/calibration.hpp"
#include "rcgps/csv.hpp"
#include "rcgps/diagnostics.hpp"
#include "rcgps/errors.hpp"
#include "rcgps/estimators.hpp"
#include "rcgps/gps.hpp"
#include "rcgps/outcome.hpp"
#include "rcgps/tabular.hpp"

namespace rcgps {

using json = nlohmann::ordered_json;

// Everything cmd_estimate / cmd_diagnose need for one run. Parsed from a
// JSON config file; schema violations report the offending field path.
struct PipelineConfig {
  std::string main_csv;
  std::string validation_csv;
  std::map<std::string, ColumnRole> roles;
  std::vector<double> cutoffs;
  EstimatorMethod method = EstimatorMethod::subclassification;
  int n_subclasses = 10;
  double weight_cap = 10.0;
  bool hajek = false;
  TrimStrategy trim = TrimStrategy::none;
  double trim_alpha = 0.05;
  bool strict_subclasses = false;
  std::vector<ContrastScale> scales = {ContrastScale::difference,
                                       ContrastScale::ratio};
  bool scales_explicit = false;
  std::uint64_t seed = 0;
  std::string output_dir = "rcgps-out";

  struct Bootstrap {
    std::size_t replicates = 100;
    BootstrapMode mode = BootstrapMode::standard;
    std::size_t m = 0;
    bool freeze_calibration = false;
  };
  std::optional<Bootstrap> bootstrap;

  std::optional<OutcomeModelSpec> outcome_model;

  struct Aggregation {
    std::string grid_csv;   // grid-level W and D, plus a grid_id column
    std::string map_csv;    // region_id, grid_id, weight
  };
  std::optional<Aggregation> aggregation;
};

namespace detail {

template <typename T>
T require_field(const json& node, const std::string& path, const char* key);

inline const json& must_get(const json& node, const std::string& path,
                            const char* key) {
  const auto it = node.find(key);
  if (it == node.end())
    throw schema_error("config: missing required field '" + path + key + "'");
  return *it;
}

template <typename T>
T field_or(const json& node, const std::string& path, const char* key,
           const T& fallback) {
  const auto it = node.find(key);
  if (it == node.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw schema_error("config: field '" + path + key + "' has the wrong type");
  }
}

template <typename T>
T require_field(const json& node, const std::string& path, const char* key) {
  const json& value = must_get(node, path, key);
  try {
    return value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw schema_error("config: field '" + path + key + "' has the wrong type");
  }
}

inline EstimatorMethod parse_method(const std::string& name,
                                    const std::string& path) {
  if (name == "subclassification") return EstimatorMethod::subclassification;
  if (name == "iptw") return EstimatorMethod::iptw;
  if (name == "matching") return EstimatorMethod::matching;
  throw schema_error("config: field '" + path +
                     "' must be one of subclassification|iptw|matching, got '" +
                     name + "'");
}

inline TrimStrategy parse_trim(const std::string& name, const std::string& path) {
  if (name == "none") return TrimStrategy::none;
  if (name == "range") return TrimStrategy::range_intersection;
  if (name == "quantile") return TrimStrategy::quantile;
  throw schema_error("config: field '" + path +
                     "' must be one of none|range|quantile, got '" + name + "'");
}

}  // namespace detail

inline PipelineConfig parse_pipeline_config(const json& root) {
  PipelineConfig cfg;
  cfg.main_csv = detail::require_field<std::string>(root, "", "main_csv");
  cfg.validation_csv =
      detail::require_field<std::string>(root, "", "validation_csv");

  const json& roles = detail::must_get(root, "", "roles");
  if (!roles.is_object())
    throw schema_error("config: field 'roles' must be an object");
  for (const auto& [column, role] : roles.items()) {
    if (!role.is_string())
      throw schema_error("config: field 'roles." + column + "' must be a string");
    cfg.roles[column] = role_from_name(role.get<std::string>());
  }

  cfg.cutoffs = detail::require_field<std::vector<double>>(root, "", "cutoffs");
  cfg.method = detail::parse_method(
      detail::require_field<std::string>(root, "", "method"), "method");
  cfg.n_subclasses = detail::field_or(root, "", "subclasses", 10);
  if (cfg.n_subclasses < 1)
    throw schema_error("config: field 'subclasses' must be >= 1");
  cfg.weight_cap = detail::field_or(root, "", "weight_cap", 10.0);
  if (cfg.weight_cap <= 0.0)
    throw schema_error("config: field 'weight_cap' must be positive");
  cfg.hajek = detail::field_or(root, "", "hajek", false);
  cfg.strict_subclasses = detail::field_or(root, "", "strict_subclasses", false);
  cfg.seed = detail::field_or<std::uint64_t>(root, "", "seed", 0);
  cfg.output_dir =
      detail::field_or<std::string>(root, "", "output_dir", "rcgps-out");

  if (const auto it = root.find("trim"); it != root.end()) {
    if (!it->is_object())
      throw schema_error("config: field 'trim' must be an object");
    cfg.trim = detail::parse_trim(
        detail::require_field<std::string>(*it, "trim.", "strategy"),
        "trim.strategy");
    cfg.trim_alpha = detail::field_or(*it, "trim.", "alpha", 0.05);
  }

  if (const auto it = root.find("scales"); it != root.end()) {
    cfg.scales.clear();
    cfg.scales_explicit = true;
    for (const auto& s : *it) {
      const std::string name = s.get<std::string>();
      if (name == "difference")
        cfg.scales.push_back(ContrastScale::difference);
      else if (name == "ratio")
        cfg.scales.push_back(ContrastScale::ratio);
      else
        throw schema_error("config: field 'scales' entries must be "
                           "difference|ratio, got '" + name + "'");
    }
    if (cfg.scales.empty())
      throw schema_error("config: field 'scales' must not be empty");
  }

  if (const auto it = root.find("bootstrap"); it != root.end()) {
    if (!it->is_object())
      throw schema_error("config: field 'bootstrap' must be an object");
    PipelineConfig::Bootstrap boot;
    boot.replicates = detail::field_or<std::size_t>(*it, "bootstrap.",
                                                    "replicates", 100);
    if (boot.replicates < 2)
      throw schema_error("config: field 'bootstrap.replicates' must be >= 2");
    const std::string mode =
        detail::field_or<std::string>(*it, "bootstrap.", "mode", "standard");
    if (mode == "standard")
      boot.mode = BootstrapMode::standard;
    else if (mode == "m_out_of_n")
      boot.mode = BootstrapMode::m_out_of_n;
    else
      throw schema_error("config: field 'bootstrap.mode' must be "
                         "standard|m_out_of_n, got '" + mode + "'");
    boot.m = detail::field_or<std::size_t>(*it, "bootstrap.", "m", 0);
    boot.freeze_calibration =
        detail::field_or(*it, "bootstrap.", "freeze_calibration", false);
    cfg.bootstrap = boot;
  }
  if (cfg.method == EstimatorMethod::matching && cfg.bootstrap &&
      cfg.bootstrap->mode != BootstrapMode::m_out_of_n)
    throw schema_error("config: matching requires bootstrap.mode = m_out_of_n "
                       "(the standard bootstrap is invalid for matching)");

  if (const auto it = root.find("outcome_model"); it != root.end()) {
    if (!it->is_object())
      throw schema_error("config: field 'outcome_model' must be an object");
    OutcomeModelSpec spec;
    const std::string link =
        detail::field_or<std::string>(*it, "outcome_model.", "link", "identity");
    if (link == "identity")
      spec.link = Link::identity;
    else if (link == "log")
      spec.link = Link::log;
    else
      throw schema_error("config: field 'outcome_model.link' must be "
                         "identity|log, got '" + link + "'");
    spec.offset_column =
        detail::field_or<std::string>(*it, "outcome_model.", "offset", "");
    spec.stratum_column =
        detail::field_or<std::string>(*it, "outcome_model.", "stratum", "");
    spec.include_confounders =
        detail::field_or(*it, "outcome_model.", "include_confounders", false);
    if (spec.link == Link::log && spec.offset_column.empty())
      throw schema_error("config: 'outcome_model.offset' is required for the "
                         "log link");
    cfg.outcome_model = spec;
  }

  if (const auto it = root.find("aggregation"); it != root.end()) {
    if (!it->is_object())
      throw schema_error("config: field 'aggregation' must be an object");
    PipelineConfig::Aggregation agg;
    agg.grid_csv =
        detail::require_field<std::string>(*it, "aggregation.", "grid_csv");
    agg.map_csv =
        detail::require_field<std::string>(*it, "aggregation.", "map_csv");
    cfg.aggregation = agg;
  }
  return cfg;
}

struct PipelineArtifacts {
  RcModel rc_model;
  std::vector<int> exposure_categories;  // after trimming
  GpsMatrix gps;                         // after trimming
  TabularDataset analysis_data;          // after trimming
  TrimResult trim;
  PotentialOutcomeEstimates estimates;
  std::optional<OutcomeModel> outcome_model;
  AteTable ate;
  BalanceReport balance;
  OverlapSummary overlap;
  std::optional<MatchAssignment> matches;
};

namespace detail {

inline void apply_roles(TabularDataset& data,
                        const std::map<std::string, ColumnRole>& roles) {
  for (const auto& [column, role] : roles)
    if (data.has_column(column)) data.set_role(column, role);
}

inline Eigen::MatrixXd confounder_matrix(const TabularDataset& data) {
  const auto names = data.columns_with_role(ColumnRole::confounder);
  if (names.empty())
    throw schema_error("no columns carry the 'confounder' role");
  Eigen::MatrixXd out(data.n_rows(), names.size());
  for (std::size_t j = 0; j < names.size(); ++j) {
    const auto& col = data.column(names[j]);
    for (std::size_t i = 0; i < col.size(); ++i)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col[i];
  }
  return out;
}

// Grid-level calibration predictions aggregated to regions and joined onto
// the main study through its region_id column.
inline std::vector<double> aggregated_xhat(const RcModel& model,
                                           const PipelineConfig& cfg,
                                           const TabularDataset& main) {
  TabularDataset grid = read_csv(cfg.aggregation->grid_csv);
  apply_roles(grid, cfg.roles);
  if (!grid.has_column("grid_id"))
    throw schema_error("aggregation grid CSV needs a 'grid_id' column");
  const std::vector<double> xhat_grid = predict_xhat(model, grid);

  std::map<std::int64_t, std::size_t> grid_position;
  const auto& grid_ids = grid.column("grid_id");
  for (std::size_t i = 0; i < grid_ids.size(); ++i) {
    const auto id = static_cast<std::int64_t>(grid_ids[i]);
    if (!grid_position.emplace(id, i).second)
      throw data_error("aggregation: duplicate grid_id " + std::to_string(id));
  }

  TabularDataset map_table = read_csv(cfg.aggregation->map_csv);
  for (const char* required : {"region_id", "grid_id", "weight"})
    if (!map_table.has_column(required))
      throw schema_error(std::string("aggregation map CSV needs a '") +
                         required + "' column");
  GridRegionMap region_map;
  const auto& map_regions = map_table.column("region_id");
  const auto& map_grids = map_table.column("grid_id");
  const auto& map_weights = map_table.column("weight");
  for (std::size_t i = 0; i < map_table.n_rows(); ++i) {
    const auto grid_it =
        grid_position.find(static_cast<std::int64_t>(map_grids[i]));
    if (grid_it == grid_position.end())
      throw data_error("aggregation: map row " + std::to_string(i + 1) +
                       " references unknown grid_id " +
                       std::to_string(static_cast<std::int64_t>(map_grids[i])));
    region_map.entries.push_back({static_cast<std::int64_t>(map_regions[i]),
                                  grid_it->second, map_weights[i]});
  }
  const auto region_values = aggregate_regions(xhat_grid, region_map);

  const std::string& region_col =
      main.single_column_with_role(ColumnRole::region_id);
  const auto& regions = main.column(region_col);
  std::vector<double> xhat(main.n_rows());
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const auto it = region_values.find(static_cast<std::int64_t>(regions[i]));
    if (it == region_values.end())
      throw data_error("aggregation: main-study region " +
                       std::to_string(static_cast<std::int64_t>(regions[i])) +
                       " has no aggregated exposure");
    xhat[i] = it->second;
  }
  return xhat;
}

}  // namespace detail

// Schema checks with column-named errors, run before any fitting.
inline void check_pipeline_schema(const PipelineConfig& cfg,
                                  const TabularDataset& main,
                                  const TabularDataset& validation) {
  const auto configured_column = [&cfg](ColumnRole role) -> const std::string* {
    for (const auto& [column, r] : cfg.roles)
      if (r == role) return &column;
    return nullptr;
  };
  const auto require_in = [&](ColumnRole role, const TabularDataset& data,
                              const char* which) {
    const std::string* column = configured_column(role);
    if (column == nullptr)
      throw schema_error(std::string("config assigns no column the '") +
                         role_name(role) + "' role");
    if (!data.has_column(*column))
      throw schema_error(std::string(which) + " study is missing the configured " +
                         role_name(role) + " column '" + *column + "'");
  };
  require_in(ColumnRole::outcome, main, "main");
  require_in(ColumnRole::true_exposure, validation, "validation");
  require_in(ColumnRole::error_prone_exposure, validation, "validation");
  if (!cfg.aggregation)
    require_in(ColumnRole::error_prone_exposure, main, "main");
  bool any_confounder = false;
  for (const auto& [column, role] : cfg.roles)
    if (role == ColumnRole::confounder) {
      any_confounder = true;
      if (!main.has_column(column))
        throw schema_error("main study is missing the configured confounder "
                           "column '" + column + "'");
    }
  if (!any_confounder)
    throw schema_error("config assigns no column the 'confounder' role");
}

// Steps 1-7 of the two-stage procedure on already-loaded data: calibrate,
// predict, categorize, fit GPS, trim, estimate, contrast.
inline PipelineArtifacts run_pipeline(const PipelineConfig& cfg,
                                      const TabularDataset& main,
                                      const TabularDataset& validation) {
  check_pipeline_schema(cfg, main, validation);
  PipelineArtifacts artifacts;
  artifacts.rc_model = fit_rc(validation);

  const std::vector<double> xhat =
      cfg.aggregation ? detail::aggregated_xhat(artifacts.rc_model, cfg, main)
                      : predict_xhat(artifacts.rc_model, main);
  const CutoffSpec cutoffs(cfg.cutoffs);
  std::vector<int> xc = categorize(xhat, cutoffs);

  Eigen::MatrixXd confounders = detail::confounder_matrix(main);
  const GpsModel gps_model = fit_multinomial(xc, confounders);
  GpsMatrix gps = predict_gps(gps_model, confounders);

  TrimmedData trimmed = trim_overlap(main, gps, xc, cfg.trim, cfg.trim_alpha);
  artifacts.trim = trimmed.trim;
  artifacts.analysis_data = std::move(trimmed.dataset);
  artifacts.gps = std::move(trimmed.gps);
  artifacts.exposure_categories = std::move(trimmed.xc);

  const auto& data = artifacts.analysis_data;
  const auto& y = data.column(data.single_column_with_role(ColumnRole::outcome));
  const auto& kept_xc = artifacts.exposure_categories;

  BalanceDesign design;
  switch (cfg.method) {
    case EstimatorMethod::subclassification: {
      artifacts.estimates = estimate_subclassification(
          y, kept_xc, artifacts.gps, cfg.n_subclasses,
          {.strict = cfg.strict_subclasses});
      design.kind = BalanceDesign::Kind::subclasses;
      design.gps = &artifacts.gps;
      design.n_subclasses = cfg.n_subclasses;
      break;
    }
    case EstimatorMethod::iptw: {
      artifacts.estimates = estimate_iptw(
          y, kept_xc, artifacts.gps,
          {.weight_cap = cfg.weight_cap, .hajek = cfg.hajek});
      design.kind = BalanceDesign::Kind::weights;
      design.weights.resize(kept_xc.size());
      for (std::size_t j = 0; j < kept_xc.size(); ++j)
        design.weights[j] = std::min(
            1.0 / artifacts.gps.probs(static_cast<Eigen::Index>(j),
                                      kept_xc[j] - 1),
            cfg.weight_cap);
      break;
    }
    case EstimatorMethod::matching: {
      auto [estimates, matches] = estimate_matching(y, kept_xc, artifacts.gps);
      artifacts.estimates = std::move(estimates);
      artifacts.matches = std::move(matches);
      design.kind = BalanceDesign::Kind::matched;
      design.assignment = &*artifacts.matches;
      break;
    }
  }

  if (cfg.outcome_model) {
    switch (cfg.method) {
      case EstimatorMethod::subclassification:
        artifacts.outcome_model = fit_outcome_glm_subclassified(
            data, y, kept_xc, artifacts.gps, cfg.n_subclasses,
            *cfg.outcome_model);
        break;
      case EstimatorMethod::iptw:
        artifacts.outcome_model = fit_outcome_glm(
            data, y, implement_iptw(kept_xc, artifacts.gps, cfg.weight_cap),
            *cfg.outcome_model);
        break;
      case EstimatorMethod::matching:
        artifacts.outcome_model = fit_outcome_glm(
            data, y, implement_matching(*artifacts.matches), *cfg.outcome_model);
        break;
    }
  }

  // Contrasts come from the GLM means when an outcome model is configured,
  // otherwise from the estimator means directly.
  PotentialOutcomeEstimates contrast_source = artifacts.estimates;
  if (artifacts.outcome_model)
    contrast_source.means = artifacts.outcome_model->category_means;
  try {
    artifacts.ate = ate_contrasts(contrast_source, cfg.scales);
  } catch (const data_error&) {
    // Ratios are part of the default scale set; when a mean is nonpositive
    // they only fail the run if the config asked for them explicitly.
    if (cfg.scales_explicit) throw;
    const std::array fallback = {ContrastScale::difference};
    artifacts.ate = ate_contrasts(contrast_source, fallback);
  }

  artifacts.balance = balance_report(data, kept_xc, artifacts.gps, cfg.method,
                                     design);
  artifacts.balance.kept_fraction = artifacts.trim.kept_fraction;
  artifacts.overlap = overlap_summary(artifacts.gps, kept_xc);
  return artifacts;
}

// Full estimate command: pipeline plus optional bootstrap CIs.
inline std::pair<PipelineArtifacts, std::optional<BootstrapResult>>
run_estimate(const PipelineConfig& cfg, const TabularDataset& main,
             const TabularDataset& validation) {
  PipelineArtifacts artifacts = run_pipeline(cfg, main, validation);
  std::optional<BootstrapResult> boot;
  if (cfg.bootstrap) {
    BootstrapOptions options;
    options.replicates = cfg.bootstrap->replicates;
    options.mode = cfg.bootstrap->mode;
    options.m = cfg.bootstrap->m;
    options.freeze_calibration = cfg.bootstrap->freeze_calibration;
    options.seed = cfg.seed;
    boot = bootstrap_ate(
        [&cfg](const TabularDataset& m, const TabularDataset& v) {
          return run_pipeline(cfg, m, v).ate;
        },
        main, validation, artifacts.ate, options);
  }
  return {std::move(artifacts), std::move(boot)};
}

// --- JSON / CSV emission -------------------------------------------------

inline json rc_model_to_json(const RcModel& model) {
  json out;
  out["gamma0"] = model.gamma0;
  out["gamma1"] = model.gamma1;
  out["gamma2"] = model.gamma2;
  out["se_gamma1"] = model.se_gamma1;
  out["residual_variance"] = model.residual_variance;
  out["r_squared"] = model.r_squared;
  out["w_column"] = model.w_column;
  out["covariate_names"] = model.covariate_names;
  out["n_fit"] = model.n_fit;
  return out;
}

inline RcModel rc_model_from_json(const json& node) {
  RcModel model;
  model.gamma0 = node.at("gamma0").get<double>();
  model.gamma1 = node.at("gamma1").get<double>();
  model.gamma2 = node.at("gamma2").get<std::vector<double>>();
  model.se_gamma1 = node.at("se_gamma1").get<double>();
  model.residual_variance = node.at("residual_variance").get<double>();
  model.r_squared = node.at("r_squared").get<double>();
  model.w_column = node.at("w_column").get<std::string>();
  model.covariate_names =
      node.at("covariate_names").get<std::vector<std::string>>();
  model.n_fit = node.at("n_fit").get<std::size_t>();
  return model;
}

inline std::string ate_table_to_csv(const AteTable& table) {
  std::string out = "method,x,x_prime,scale,estimate,se,ci_lower,ci_upper\n";
  for (const auto& row : table.rows) {
    out += row.method;
    out.push_back(',');
    out += std::to_string(row.x);
    out.push_back(',');
    out += std::to_string(row.x_prime);
    out.push_back(',');
    out += scale_name(row.scale);
    out.push_back(',');
    detail::append_double(out, row.estimate);
    out.push_back(',');
    detail::append_double(out, row.se);
    out.push_back(',');
    detail::append_double(out, row.ci_lower);
    out.push_back(',');
    detail::append_double(out, row.ci_upper);
    out.push_back('\n');
  }
  return out;
}

inline json ate_table_to_json(const AteTable& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    json entry;
    entry["method"] = row.method;
    entry["x"] = row.x;
    entry["x_prime"] = row.x_prime;
    entry["scale"] = scale_name(row.scale);
    entry["estimate"] = row.estimate;
    if (std::isfinite(row.se)) {
      entry["se"] = row.se;
      entry["ci_lower"] = row.ci_lower;
      entry["ci_upper"] = row.ci_upper;
    }
    rows.push_back(entry);
  }
  return rows;
}

inline std::string balance_report_to_csv(const BalanceReport& report) {
  std::string out = "method,confounder,category,asb_before,asb_after\n";
  for (const auto& entry : report.entries) {
    out += report.method;
    out.push_back(',');
    out += entry.confounder;
    out.push_back(',');
    out += std::to_string(entry.category);
    out.push_back(',');
    detail::append_double(out, entry.asb_before);
    out.push_back(',');
    detail::append_double(out, entry.asb_after);
    out.push_back('\n');
  }
  return out;
}

inline std::string overlap_summary_to_csv(const OverlapSummary& summary) {
  std::string out = "element,group,bin,bin_lower,bin_upper,count\n";
  for (const auto& group : summary.groups) {
    for (std::size_t b = 0; b < group.histogram.size(); ++b) {
      out += std::to_string(group.element);
      out.push_back(',');
      out += std::to_string(group.group);
      out.push_back(',');
      out += std::to_string(b + 1);
      out.push_back(',');
      detail::append_double(out, static_cast<double>(b) / summary.bins);
      out.push_back(',');
      detail::append_double(out, static_cast<double>(b + 1) / summary.bins);
      out.push_back(',');
      out += std::to_string(group.histogram[b]);
      out.push_back('\n');
    }
  }
  return out;
}

inline std::string overlap_ranges_to_csv(const OverlapSummary& summary) {
  std::string out = "element,group,min,max,intersection_fraction\n";
  for (const auto& group : summary.groups) {
    out += std::to_string(group.element);
    out.push_back(',');
    out += std::to_string(group.group);
    out.push_back(',');
    detail::append_double(out, group.min);
    out.push_back(',');
    detail::append_double(out, group.max);
    out.push_back(',');
    detail::append_double(
        out,
        summary.intersection_fraction[static_cast<std::size_t>(group.element - 1)]);
    out.push_back('\n');
  }
  return out;
}

inline std::string gps_to_csv(const GpsMatrix& gps) {
  std::string out;
  for (int x = 1; x <= gps.n_categories(); ++x) {
    if (x > 1) out.push_back(',');
    out += "p" + std::to_string(x);
  }
  out.push_back('\n');
  for (std::size_t j = 0; j < gps.n_units(); ++j) {
    for (int x = 0; x < gps.n_categories(); ++x) {
      if (x > 0) out.push_back(',');
      detail::append_double(out, gps.probs(static_cast<Eigen::Index>(j), x));
    }
    out.push_back('\n');
  }
  return out;
}

inline std::string match_assignment_to_csv(const MatchAssignment& assignment) {
  std::string out = "unit,category,donor\n";
  for (std::size_t x = 0; x < assignment.donors.size(); ++x)
    for (std::size_t j = 0; j < assignment.donors[x].size(); ++j) {
      out += std::to_string(j + 1);
      out.push_back(',');
      out += std::to_string(x + 1);
      out.push_back(',');
      out += std::to_string(assignment.donors[x][j] + 1);
      out.push_back('\n');
    }
  return out;
}

}  // namespace rcgps

#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rcgps/pipeline.hpp"
#include "rcgps/simulation.hpp"

namespace rcgps {

// Configuration of one simulation study run: which arms (exposure handling)
// and estimators to replicate, against what oracle.
struct StudyConfig {
  ScenarioConfig scenario;
  std::size_t replicates = 200;
  std::vector<EstimatorMethod> methods = {EstimatorMethod::subclassification,
                                          EstimatorMethod::iptw,
                                          EstimatorMethod::matching};
  std::vector<RcSpec> arms = {RcSpec::error_free, RcSpec::error_prone,
                              RcSpec::rc_no_covariates,
                              RcSpec::rc_with_covariates};
  ReplicateOptions options;
  std::size_t oracle_n = 1000000;
  std::uint64_t oracle_seed = 42;
  // Transportability ladder: when non-empty, also run rc_with_covariates
  // with gamma1 perturbed by each delta (common random numbers across deltas).
  std::vector<double> sensitivity_deltas;
  EstimatorMethod sensitivity_method = EstimatorMethod::subclassification;
  bool dump_replicates = false;
  std::string output_dir = "rcgps-out";
};

struct SensitivitySummary {
  double delta = 0.0;
  ReplicateSummary summary;
};

struct StudyResult {
  std::array<double, 2> oracle{};
  std::vector<ReplicateSummary> summaries;
  std::vector<SensitivitySummary> sensitivity;
};

namespace detail {

inline RcSpec parse_rc_spec(const std::string& name, const std::string& path) {
  if (name == "error_free") return RcSpec::error_free;
  if (name == "error_prone") return RcSpec::error_prone;
  if (name == "rc_no_covariates") return RcSpec::rc_no_covariates;
  if (name == "rc_with_covariates") return RcSpec::rc_with_covariates;
  throw schema_error("config: field '" + path +
                     "' must be one of error_free|error_prone|"
                     "rc_no_covariates|rc_with_covariates, got '" +
                     name + "'");
}

template <std::size_t N>
std::array<double, N> parse_fixed_array(const json& node, const std::string& path) {
  const auto values = node.get<std::vector<double>>();
  if (values.size() != N)
    throw schema_error("config: field '" + path + "' needs exactly " +
                       std::to_string(N) + " entries");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = values[i];
  return out;
}

}  // namespace detail

inline ScenarioConfig scenario_config_from_json(const json& node,
                                                const std::string& path) {
  ScenarioConfig cfg;
  if (const auto it = node.find("tau"); it != node.end())
    cfg.tau = detail::parse_fixed_array<7>(*it, path + "tau");
  cfg.gamma1 = detail::field_or(node, path, "gamma1", cfg.gamma1);
  if (const auto it = node.find("gamma2"); it != node.end())
    cfg.gamma2 = detail::parse_fixed_array<3>(*it, path + "gamma2");
  cfg.gamma3 = detail::field_or(node, path, "gamma3", cfg.gamma3);
  cfg.rc_noise_sd = detail::field_or(node, path, "rc_noise_sd", cfg.rc_noise_sd);
  cfg.beta1 = detail::field_or(node, path, "beta1", cfg.beta1);
  if (const auto it = node.find("beta2"); it != node.end())
    cfg.beta2 = detail::parse_fixed_array<6>(*it, path + "beta2");
  cfg.y_noise_sd = detail::field_or(node, path, "y_noise_sd", cfg.y_noise_sd);
  cfg.w_noise_sd = detail::field_or(node, path, "w_noise_sd", cfg.w_noise_sd);
  cfg.n_main = detail::field_or<std::size_t>(node, path, "n_main", cfg.n_main);
  cfg.n_validation =
      detail::field_or<std::size_t>(node, path, "n_validation", cfg.n_validation);
  cfg.cutoffs = detail::field_or(node, path, "cutoffs", cfg.cutoffs);
  cfg.replicates =
      detail::field_or<std::size_t>(node, path, "replicates", cfg.replicates);
  cfg.seed = detail::field_or<std::uint64_t>(node, path, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

inline json scenario_config_to_json(const ScenarioConfig& cfg) {
  json out;
  out["tau"] = cfg.tau;
  out["gamma1"] = cfg.gamma1;
  out["gamma2"] = cfg.gamma2;
  out["gamma3"] = cfg.gamma3;
  out["rc_noise_sd"] = cfg.rc_noise_sd;
  out["beta1"] = cfg.beta1;
  out["beta2"] = cfg.beta2;
  out["y_noise_sd"] = cfg.y_noise_sd;
  out["w_noise_sd"] = cfg.w_noise_sd;
  out["n_main"] = cfg.n_main;
  out["n_validation"] = cfg.n_validation;
  out["cutoffs"] = cfg.cutoffs;
  out["replicates"] = cfg.replicates;
  out["seed"] = cfg.seed;
  return out;
}

inline StudyConfig study_config_from_json(const json& root) {
  StudyConfig cfg;
  if (const auto it = root.find("scenario"); it != root.end())
    cfg.scenario = scenario_config_from_json(*it, "scenario.");
  cfg.replicates = detail::field_or<std::size_t>(root, "", "replicates",
                                                 cfg.scenario.replicates);
  if (cfg.replicates < 1)
    throw schema_error("config: field 'replicates' must be >= 1");

  if (const auto it = root.find("methods"); it != root.end()) {
    cfg.methods.clear();
    for (const auto& m : *it)
      cfg.methods.push_back(
          detail::parse_method(m.get<std::string>(), "methods"));
    if (cfg.methods.empty())
      throw schema_error("config: field 'methods' must not be empty");
  }
  if (const auto it = root.find("arms"); it != root.end()) {
    cfg.arms.clear();
    for (const auto& a : *it)
      cfg.arms.push_back(detail::parse_rc_spec(a.get<std::string>(), "arms"));
    if (cfg.arms.empty())
      throw schema_error("config: field 'arms' must not be empty");
  }

  cfg.options.n_subclasses = detail::field_or(root, "", "subclasses", 10);
  cfg.options.weight_cap = detail::field_or(root, "", "weight_cap", 10.0);
  cfg.options.trim = detail::parse_trim(
      detail::field_or<std::string>(root, "", "trim", "none"), "trim");
  cfg.oracle_n =
      detail::field_or<std::size_t>(root, "", "oracle_n", cfg.oracle_n);
  cfg.oracle_seed =
      detail::field_or<std::uint64_t>(root, "", "oracle_seed", cfg.oracle_seed);
  cfg.sensitivity_deltas =
      detail::field_or(root, "", "sensitivity_deltas", cfg.sensitivity_deltas);
  for (const double delta : cfg.sensitivity_deltas)
    if (delta < 0.0)
      throw schema_error("config: 'sensitivity_deltas' must be nonnegative");
  cfg.sensitivity_method = detail::parse_method(
      detail::field_or<std::string>(root, "", "sensitivity_method",
                                    "subclassification"),
      "sensitivity_method");
  cfg.dump_replicates = detail::field_or(root, "", "dump_replicates", false);
  cfg.output_dir =
      detail::field_or<std::string>(root, "", "output_dir", cfg.output_dir);
  return cfg;
}

inline StudyResult run_study(const StudyConfig& cfg) {
  StudyResult result;
  const auto oracle = oracle_ate(cfg.scenario, cfg.oracle_n, cfg.oracle_seed);
  result.oracle = {oracle.first, oracle.second};

  for (const EstimatorMethod method : cfg.methods)
    for (const RcSpec arm : cfg.arms)
      result.summaries.push_back(run_replicates(
          cfg.scenario, method, arm, cfg.replicates, result.oracle, cfg.options));

  for (const double delta : cfg.sensitivity_deltas) {
    ReplicateOptions options = cfg.options;
    options.perturb_delta_sd = delta;
    SensitivitySummary entry;
    entry.delta = delta;
    entry.summary =
        run_replicates(cfg.scenario, cfg.sensitivity_method,
                       RcSpec::rc_with_covariates, cfg.replicates,
                       result.oracle, options);
    result.sensitivity.push_back(std::move(entry));
  }
  return result;
}

inline std::string study_summary_to_csv(const StudyResult& result) {
  std::string out =
      "method,arm,contrast,oracle,mean_estimate,bias,percent_bias,"
      "empirical_sd,mc_se,replicates,failed\n";
  const auto emit = [&out](const ReplicateSummary& s, const std::string& arm) {
    for (std::size_t k = 0; k < 2; ++k) {
      out += method_name(s.method);
      out.push_back(',');
      out += arm;
      out.push_back(',');
      out += k == 0 ? "2v1" : "3v2";
      out.push_back(',');
      detail::append_double(out, s.oracle[k]);
      out.push_back(',');
      detail::append_double(out, s.mean_estimate[k]);
      out.push_back(',');
      detail::append_double(out, s.bias[k]);
      out.push_back(',');
      detail::append_double(out, s.percent_bias[k]);
      out.push_back(',');
      detail::append_double(out, s.empirical_sd[k]);
      out.push_back(',');
      detail::append_double(out, s.mc_standard_error[k]);
      out.push_back(',');
      out += std::to_string(s.replicates_run);
      out.push_back(',');
      out += std::to_string(s.replicates_failed);
      out.push_back('\n');
    }
  };
  for (const auto& summary : result.summaries)
    emit(summary, rc_spec_name(summary.rc_spec));
  for (const auto& entry : result.sensitivity) {
    std::string arm = "sensitivity_delta_";
    detail::append_double(arm, entry.delta);
    emit(entry.summary, arm);
  }
  return out;
}

inline json study_summary_to_json(const StudyResult& result) {
  json out;
  out["oracle"] = {{"ate_2v1", result.oracle[0]}, {"ate_3v2", result.oracle[1]}};
  json rows = json::array();
  const auto emit = [&rows](const ReplicateSummary& s, const std::string& arm,
                            std::optional<double> delta) {
    for (std::size_t k = 0; k < 2; ++k) {
      json row;
      row["method"] = method_name(s.method);
      row["arm"] = arm;
      if (delta) row["delta"] = *delta;
      row["contrast"] = k == 0 ? "2v1" : "3v2";
      row["oracle"] = s.oracle[k];
      row["mean_estimate"] = s.mean_estimate[k];
      row["bias"] = s.bias[k];
      row["percent_bias"] = s.percent_bias[k];
      row["empirical_sd"] = s.empirical_sd[k];
      row["mc_se"] = s.mc_standard_error[k];
      row["replicates"] = s.replicates_run;
      row["failed"] = s.replicates_failed;
      rows.push_back(row);
    }
  };
  for (const auto& summary : result.summaries)
    emit(summary, rc_spec_name(summary.rc_spec), std::nullopt);
  for (const auto& entry : result.sensitivity)
    emit(entry.summary, "sensitivity", entry.delta);
  out["summaries"] = rows;
  return out;
}

inline std::string replicate_estimates_to_csv(const StudyResult& result) {
  std::string out = "method,arm,replicate,ate_2v1,ate_3v2\n";
  for (const auto& summary : result.summaries) {
    for (std::size_t r = 0; r < summary.estimates[0].size(); ++r) {
      out += method_name(summary.method);
      out.push_back(',');
      out += rc_spec_name(summary.rc_spec);
      out.push_back(',');
      out += std::to_string(r + 1);
      out.push_back(',');
      detail::append_double(out, summary.estimates[0][r]);
      out.push_back(',');
      detail::append_double(out, summary.estimates[1][r]);
      out.push_back('\n');
    }
  }
  return out;
}

}  // namespace rcgps

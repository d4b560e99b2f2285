// Command-line front end: `simulate` runs the Monte Carlo study, `estimate`
// runs the two-stage analysis end to end on user data, `diagnose` emits the
// balance and overlap reports only. Each command takes one JSON config and
// writes deterministic outputs into a config-hash-stamped directory.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rcgps/rcgps.hpp"
#include "rcgps/study.hpp"

namespace fs = std::filesystem;
using rcgps::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDataError = 2;
constexpr int kExitConvergenceError = 3;

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw rcgps::data_error("cannot open config file '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw rcgps::parse_error("config '" + path + "' is not valid JSON: " +
                             e.what());
  }
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex16(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

// One run directory per (config, seed): re-running with identical inputs
// overwrites the same files byte for byte.
struct RunDirectory {
  fs::path path;
  json manifest;

  RunDirectory(const std::string& base, const std::string& command,
               const json& config, std::uint64_t seed) {
    const std::string hash = hex16(fnv1a(config.dump() + "\n" + command + "\n" +
                                         std::to_string(seed)));
    path = fs::path(base) / ("run-" + hash);
    fs::create_directories(path);
    manifest["command"] = command;
    manifest["config_hash"] = hash;
    manifest["version"] = RCGPS_VERSION;
    manifest["seed"] = seed;
    manifest["outputs"] = json::array();
  }

  void write_text(const std::string& name, const std::string& body) {
    std::ofstream out(path / name, std::ios::binary);
    if (!out)
      throw rcgps::data_error("cannot write output file '" +
                              (path / name).string() + "'");
    out << body;
    manifest["outputs"].push_back(name);
  }

  void write_json(const std::string& name, const json& body) {
    write_text(name, body.dump(2) + "\n");
  }

  void finish() {
    std::ofstream out(path / "manifest.json", std::ios::binary);
    out << manifest.dump(2) << "\n";
    std::cout << "outputs written to " << path.string() << "\n";
  }
};

struct LoadedData {
  rcgps::TabularDataset main;
  rcgps::TabularDataset validation;
};

LoadedData load_pipeline_data(const rcgps::PipelineConfig& cfg) {
  LoadedData data;
  data.main = rcgps::read_csv(cfg.main_csv);
  data.validation = rcgps::read_csv(cfg.validation_csv);
  rcgps::detail::apply_roles(data.main, cfg.roles);
  rcgps::detail::apply_roles(data.validation, cfg.roles);
  data.main.validate();
  data.validation.validate();
  return data;
}

void write_estimate_outputs(RunDirectory& run,
                            const rcgps::PipelineArtifacts& artifacts,
                            const std::optional<rcgps::BootstrapResult>& boot) {
  const rcgps::AteTable& table = boot ? boot->table : artifacts.ate;
  run.write_text("ate.csv", rcgps::ate_table_to_csv(table));
  run.write_json("ate.json", rcgps::ate_table_to_json(table));
  run.write_text("balance.csv", rcgps::balance_report_to_csv(artifacts.balance));
  run.write_text("overlap.csv", rcgps::overlap_summary_to_csv(artifacts.overlap));
  run.write_text("overlap_ranges.csv",
                 rcgps::overlap_ranges_to_csv(artifacts.overlap));
  run.write_text("gps.csv", rcgps::gps_to_csv(artifacts.gps));
  run.write_json("rc_model.json", rcgps::rc_model_to_json(artifacts.rc_model));
  if (artifacts.matches)
    run.write_text("matches.csv",
                   rcgps::match_assignment_to_csv(*artifacts.matches));
  run.manifest["kept_fraction"] = artifacts.trim.kept_fraction;
  if (boot) run.manifest["bootstrap_failed_replicates"] = boot->failed_replicates;
}

int cmd_estimate(const json& config, std::optional<std::uint64_t> seed_override,
                 bool diagnose_only) {
  rcgps::PipelineConfig cfg = rcgps::parse_pipeline_config(config);
  if (seed_override) cfg.seed = *seed_override;
  const LoadedData data = load_pipeline_data(cfg);

  RunDirectory run(cfg.output_dir, diagnose_only ? "diagnose" : "estimate",
                   config, cfg.seed);
  if (diagnose_only) {
    const rcgps::PipelineArtifacts artifacts =
        rcgps::run_pipeline(cfg, data.main, data.validation);
    run.write_text("balance.csv",
                   rcgps::balance_report_to_csv(artifacts.balance));
    run.write_text("overlap.csv",
                   rcgps::overlap_summary_to_csv(artifacts.overlap));
    run.write_text("overlap_ranges.csv",
                   rcgps::overlap_ranges_to_csv(artifacts.overlap));
    run.write_text("gps.csv", rcgps::gps_to_csv(artifacts.gps));
    run.write_json("rc_model.json",
                   rcgps::rc_model_to_json(artifacts.rc_model));
    run.manifest["kept_fraction"] = artifacts.trim.kept_fraction;
  } else {
    const auto [artifacts, boot] =
        rcgps::run_estimate(cfg, data.main, data.validation);
    write_estimate_outputs(run, artifacts, boot);
  }
  run.finish();
  return kExitOk;
}

int cmd_simulate(const json& config, std::optional<std::uint64_t> seed_override) {
  rcgps::StudyConfig cfg = rcgps::study_config_from_json(config);
  if (seed_override) cfg.scenario.seed = *seed_override;

  RunDirectory run(cfg.output_dir, "simulate", config, cfg.scenario.seed);
  const rcgps::StudyResult result = rcgps::run_study(cfg);
  run.write_text("summary.csv", rcgps::study_summary_to_csv(result));
  run.write_json("summary.json", rcgps::study_summary_to_json(result));
  run.write_json("scenario.json", rcgps::scenario_config_to_json(cfg.scenario));
  if (cfg.dump_replicates)
    run.write_text("replicates.csv", rcgps::replicate_estimates_to_csv(result));
  run.finish();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RC-GPS: regression-calibration corrected generalized "
               "propensity score analysis"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", config_path, "JSON config file")->required();
    cmd->add_option("--seed", seed_override,
                    "override the seed from the config");
  };
  CLI::App* simulate =
      app.add_subcommand("simulate", "run the Monte Carlo simulation study");
  CLI::App* estimate = app.add_subcommand(
      "estimate", "run the two-stage RC-GPS analysis on main/validation CSVs");
  CLI::App* diagnose = app.add_subcommand(
      "diagnose", "emit balance and overlap diagnostics without estimation");
  add_common(simulate);
  add_common(estimate);
  add_common(diagnose);

  CLI11_PARSE(app, argc, argv);

  try {
    const json config = load_config(config_path);
    if (simulate->parsed()) return cmd_simulate(config, seed_override);
    if (estimate->parsed()) return cmd_estimate(config, seed_override, false);
    return cmd_estimate(config, seed_override, true);
  } catch (const rcgps::convergence_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConvergenceError;
  } catch (const rcgps::error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

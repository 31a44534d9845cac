#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "apvio/errors.hpp"
#include "apvio/runner.hpp"

namespace {

namespace fs = std::filesystem;
using namespace apvio;

OracleMode parse_oracle(const std::string& s) {
  if (s == "off") return OracleMode::kOff;
  if (s == "dropout") return OracleMode::kDropout;
  if (s == "ensemble") return OracleMode::kEnsemble;
  throw CLI::ValidationError("--oracle must be off|dropout|ensemble");
}

fs::path default_out_root() {
  if (const char* env = std::getenv("APVIO_OUT_ROOT")) return fs::path(env);
  return fs::path("apvio_out");
}

struct CommonOpts {
  std::uint64_t seed = 0;
  int window_size = 20;
  double tau1 = 1.0;
  double tau2 = 0.4;
  double kappa = 1.0;
  double outlier_prob = -1.0;
  double outlier_magnitude = -1.0;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "RNG seed mixed into the scenario seed");
    app->add_option("--window-size", window_size, "sliding window length (keyframes)");
    app->add_option("--tau1", tau1, "trace rejection threshold");
    app->add_option("--tau2", tau2, "Mahalanobis rejection threshold");
    app->add_option("--kappa", kappa, "rotational aleatoric precision");
    app->add_option("--outlier-prob", outlier_prob,
                    "override scenario oracle outlier probability");
    app->add_option("--outlier-magnitude", outlier_magnitude,
                    "override scenario oracle outlier magnitude (m)");
  }
};

int do_run(const std::string& scenario, const std::string& oracle, const std::string& covariance,
           const std::string& rejection, const std::string& out, const CommonOpts& common) {
  RunConfig cfg;
  cfg.scenario_path = scenario;
  cfg.oracle = parse_oracle(oracle);
  cfg.covariance =
      covariance == "constant" ? CovarianceMode::kConstant : CovarianceMode::kEstimated;
  cfg.rejection = rejection == "on";
  cfg.seed = common.seed;
  cfg.window_size = common.window_size;
  cfg.tau1 = common.tau1;
  cfg.tau2 = common.tau2;
  cfg.kappa = common.kappa;
  if (common.outlier_prob >= 0) cfg.outlier_prob_override = common.outlier_prob;
  if (common.outlier_magnitude >= 0) cfg.outlier_magnitude_override = common.outlier_magnitude;
  cfg.out_dir = out.empty() ? default_out_root() / fs::path(scenario).stem() /
                                  config_label(cfg.oracle, cfg.covariance, cfg.rejection)
                            : fs::path(out);

  const RunResult r = run(cfg);
  std::cout << r.scenario_name << " [" << r.config << "] positional ATE " << r.ate.positional_rmse
            << " m, rotational ATE " << r.ate.rotational_rmse_deg << " deg, " << r.keyframes
            << " keyframes, oracle " << r.accepted << '/' << r.oracle_measurements
            << " accepted, wall " << r.wall_ms_total << " ms\n";
  std::cout << "outputs: " << r.out_dir.string() << '\n';
  return r.solver_failed ? 2 : 0;
}

int do_sweep(std::vector<std::string> scenarios, const std::string& scenario_dir,
             const std::string& out, int jobs, const CommonOpts& common) {
  SweepConfig cfg;
  if (!scenario_dir.empty()) {
    std::vector<fs::path> found;
    for (const auto& entry : fs::directory_iterator(scenario_dir)) {
      if (entry.path().extension() == ".json") found.push_back(entry.path());
    }
    std::sort(found.begin(), found.end());
    cfg.scenarios = std::move(found);
  }
  for (const std::string& s : scenarios) cfg.scenarios.emplace_back(s);
  if (cfg.scenarios.empty()) {
    std::cerr << "sweep: no scenarios given\n";
    return 1;
  }
  cfg.out_root = out.empty() ? default_out_root() / "sweep" : fs::path(out);
  cfg.seed = common.seed;
  cfg.window_size = common.window_size;
  cfg.tau1 = common.tau1;
  cfg.tau2 = common.tau2;
  cfg.kappa = common.kappa;
  if (common.outlier_prob >= 0) cfg.outlier_prob_override = common.outlier_prob;
  if (common.outlier_magnitude >= 0) cfg.outlier_magnitude_override = common.outlier_magnitude;
  cfg.jobs = jobs;

  const SweepResult r = sweep(cfg);
  std::cout << "sweep: " << r.rows.size() << " runs, " << r.failed_runs << " failed\n"
            << "report: " << r.report_txt.string() << '\n';
  return r.failed_runs > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Visual-inertial estimation with absolute-pose oracle fusion"};
  app.require_subcommand(1);

  std::string scenario, oracle = "ensemble", covariance = "estimated", rejection = "on", out;
  CommonOpts common;

  CLI::App* run_cmd = app.add_subcommand("run", "simulate + estimate + evaluate one configuration");
  run_cmd->add_option("--scenario", scenario, "scenario JSON file")->required();
  run_cmd->add_option("--oracle", oracle, "off|dropout|ensemble");
  run_cmd->add_option("--covariance", covariance, "constant|estimated");
  run_cmd->add_option("--rejection", rejection, "on|off");
  run_cmd->add_option("--out", out, "output directory (default $APVIO_OUT_ROOT/...)");
  common.attach(run_cmd);

  std::vector<std::string> sweep_scenarios;
  std::string scenario_dir, sweep_out;
  int jobs = 1;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "full ablation matrix over scenarios");
  sweep_cmd->add_option("--scenario", sweep_scenarios, "scenario JSON file (repeatable)");
  sweep_cmd->add_option("--scenario-dir", scenario_dir, "directory of scenario JSON files");
  sweep_cmd->add_option("--out", sweep_out, "output root (default $APVIO_OUT_ROOT/sweep)");
  sweep_cmd->add_option("--jobs", jobs, "parallel runs");
  common.attach(sweep_cmd);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      return do_run(scenario, oracle, covariance, rejection, out, common);
    }
    return do_sweep(sweep_scenarios, scenario_dir, sweep_out, jobs, common);
  } catch (const apvio::ScenarioNotFound& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const apvio::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

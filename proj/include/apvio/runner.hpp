#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "apvio/evaluation.hpp"
#include "apvio/factors.hpp"
#include "apvio/scenario.hpp"

// Experiment orchestration: one run = synthesize sensor records, replay
// them through the sliding-window backend, score against ground truth.
// A sweep executes the full nine-configuration ablation matrix over a
// scenario list and assembles the comparison report.

namespace apvio {

enum class OracleMode { kOff, kDropout, kEnsemble };

std::string to_string(OracleMode mode);
std::string to_string(CovarianceMode mode);

/// Canonical label, e.g. "ensemble_estimated_rejection" or "only_vio".
std::string config_label(OracleMode oracle, CovarianceMode covariance, bool rejection);

struct RunConfig {
  std::filesystem::path scenario_path;
  OracleMode oracle = OracleMode::kEnsemble;
  CovarianceMode covariance = CovarianceMode::kEstimated;
  bool rejection = true;
  std::uint64_t seed = 0;  // mixed with the scenario's own seed
  std::filesystem::path out_dir;
  int window_size = 20;
  double tau1 = 1.0;
  double tau2 = 0.4;
  double kappa = 1.0;
  AleatoricDivisor divisor = AleatoricDivisor::kPaper;
  std::optional<double> outlier_prob_override;
  std::optional<double> outlier_magnitude_override;
};

struct RunResult {
  std::string scenario_name;
  std::string config;
  AteResult ate;
  int keyframes = 0;
  int oracle_measurements = 0;
  int accepted = 0;
  int rejected_trace = 0;
  int rejected_mahalanobis = 0;
  int injected_outliers = 0;
  int rejected_injected_outliers = 0;  // recall numerator
  bool solver_failed = false;
  double wall_ms_total = 0;  // reported, never written to CSV outputs
  std::filesystem::path out_dir;

  double outlier_recall() const {
    return injected_outliers > 0
               ? static_cast<double>(rejected_injected_outliers) / injected_outliers
               : 1.0;
  }
};

/// Full pipeline for one configuration. Writes sensor records,
/// estimates.csv, ate_curve.csv, summary.json, and timing.log under
/// cfg.out_dir. Deterministic for fixed seeds. Throws on config errors;
/// solver failure is reported in the result.
RunResult run(const RunConfig& cfg);

struct SweepConfig {
  std::vector<std::filesystem::path> scenarios;
  std::filesystem::path out_root;
  std::uint64_t seed = 0;
  int window_size = 20;
  double tau1 = 1.0;
  double tau2 = 0.4;
  double kappa = 1.0;
  AleatoricDivisor divisor = AleatoricDivisor::kPaper;
  std::optional<double> outlier_prob_override;
  std::optional<double> outlier_magnitude_override;
  bool vio_only_only = false;  // restrict the matrix to the only-VIO column
  int jobs = 1;
};

struct SweepResult {
  std::vector<RunRecordRow> rows;
  std::vector<RunResult> runs;  // successful runs only
  int failed_runs = 0;
  std::filesystem::path report_csv;
  std::filesystem::path report_txt;
};

/// Runs the ablation matrix (only-VIO plus {dropout, ensemble} x
/// {constant, estimated} x {rejection, no rejection}) for every scenario
/// and writes report.csv / report.txt / sweep_manifest.csv under
/// out_root. Failing runs are recorded and do not abort the sweep.
SweepResult sweep(const SweepConfig& cfg);

/// splitmix64-style mixing for deriving per-stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace apvio

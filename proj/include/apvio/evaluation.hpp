#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "apvio/pose.hpp"

// Trajectory metrics (ATE, running ATE over travel distance) and the
// configuration-ablation report.

namespace apvio {

struct StampedPose {
  double t = 0;
  Posed pose;
};

struct TrajectoryEstimate {
  std::vector<StampedPose> estimate;      // sorted by time
  std::vector<StampedPose> ground_truth;  // sorted by time
  std::string scenario_id;
  std::string config_label;
};

enum class Alignment { kNone, kYawTranslation };

struct AteResult {
  double positional_rmse = 0;      // m
  double rotational_rmse_deg = 0;  // deg
  int pairs = 0;
};

/// RMSE of position-error norms and geodesic rotation angles over pairs
/// associated by nearest timestamp (within 1 ms). kYawTranslation first
/// applies the optimal 4-DoF (yaw + translation) alignment of the
/// estimate onto the truth. Throws EmptyAssociation via OutOfRange when
/// fewer than 2 pairs associate.
AteResult ate(const TrajectoryEstimate& estimate, Alignment align = Alignment::kNone);

struct AteCurvePoint {
  double distance = 0;     // cumulative ground-truth travel distance, m
  double running_ate = 0;  // RMSE over all pairs up to this distance, m
};

/// Running positional ATE sampled every `bin` meters of travel distance.
/// The last point equals the full-trajectory (unaligned) positional ATE.
std::vector<AteCurvePoint> ate_vs_distance(const TrajectoryEstimate& estimate, double bin);

void write_ate_curve_csv(const std::filesystem::path& path,
                         std::span<const AteCurvePoint> curve);
std::vector<AteCurvePoint> read_ate_curve_csv(const std::filesystem::path& path);

/// Least-squares slope (m per m) of the running-ATE curve over the final
/// `fraction` of the travelled distance.
double ate_curve_tail_slope(std::span<const AteCurvePoint> curve, double fraction);

struct RunRecordRow {
  std::string scenario;
  std::string config;  // one of the nine ablation labels
  double positional_ate = 0;
  double rotational_ate_deg = 0;
  bool failed = false;
  std::string error;
};

/// The canonical column order of the ablation table.
const std::vector<std::string>& ablation_config_order();

struct AblationReport {
  std::vector<std::string> scenarios;        // row order, Average appended last
  std::vector<std::string> configs;          // column order
  // cell [row][col]: {pos, rot}; NaN when missing/failed
  std::vector<std::vector<std::pair<double, double>>> cells;
  // per row: configs ranked best / second best by positional error
  // (only-VIO excluded from the ranking)
  std::vector<std::pair<int, int>> best_pos;
  std::vector<std::pair<int, int>> best_rot;
};

AblationReport ablation_report(std::span<const RunRecordRow> rows);

void write_report_csv(const AblationReport& report, const std::filesystem::path& path);
void write_report_txt(const AblationReport& report, const std::filesystem::path& path);

}  // namespace apvio

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "apvio/camera.hpp"
#include "apvio/imu_types.hpp"
#include "apvio/uncertain_pose.hpp"

// CSV record streams: every sensor output carries explicit timestamps so
// a run can be replayed byte-identically. Rotations cross the file
// boundary as unit quaternions (w x y z) except oracle sample sets,
// which store the full row-major rotation matrix.

namespace apvio {

struct GroundTruthRecord {
  double t = 0;
  Posed pose;
  Vec3d velocity = Vec3d::Zero();
};

struct ObservationRecord {
  double t = 0;
  int landmark_id = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

struct OracleRecordSet {
  double t = 0;
  PoseSampleSet set;
};

struct OracleLabel {
  double t = 0;
  bool injected_outlier = false;
};

struct EstimateRecord {
  double t = 0;
  Posed pose;
  Vec3d velocity = Vec3d::Zero();
  Vec3d gyro_bias = Vec3d::Zero();
  Vec3d accel_bias = Vec3d::Zero();
  std::string abs_status = "none";  // none | accepted | rejected_trace | rejected_mahalanobis
  int num_imu_factors = 0;
  int num_reproj_factors = 0;
  int num_abs_factors = 0;
  double cost = 0;
  int iterations = 0;
};

std::string format_csv_double(double v);

void write_imu_csv(const std::filesystem::path& path, std::span<const ImuRecord> records);
std::vector<ImuRecord> read_imu_csv(const std::filesystem::path& path);

void write_ground_truth_csv(const std::filesystem::path& path,
                            std::span<const GroundTruthRecord> records);
std::vector<GroundTruthRecord> read_ground_truth_csv(const std::filesystem::path& path);

void write_observations_csv(const std::filesystem::path& path,
                            std::span<const ObservationRecord> records);
std::vector<ObservationRecord> read_observations_csv(const std::filesystem::path& path);

/// One row per sample: t, sample index, position[3], rotation row-major[9],
/// aleatoric_var[3], kappa_inv.
void write_oracle_csv(const std::filesystem::path& path, std::span<const OracleRecordSet> sets);
std::vector<OracleRecordSet> read_oracle_csv(const std::filesystem::path& path);

void write_oracle_labels_csv(const std::filesystem::path& path,
                             std::span<const OracleLabel> labels);
std::vector<OracleLabel> read_oracle_labels_csv(const std::filesystem::path& path);

void write_landmarks_csv(const std::filesystem::path& path, std::span<const Landmark> landmarks);
std::vector<Landmark> read_landmarks_csv(const std::filesystem::path& path);

void write_estimates_csv(const std::filesystem::path& path,
                         std::span<const EstimateRecord> records);
std::vector<EstimateRecord> read_estimates_csv(const std::filesystem::path& path);

}  // namespace apvio

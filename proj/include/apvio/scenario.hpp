#pragma once

#include <filesystem>
#include <string>

#include "apvio/camera.hpp"
#include "apvio/imu_synth.hpp"
#include "apvio/oracle.hpp"
#include "apvio/trajectory.hpp"

namespace apvio {

struct KeyframeSchedule {
  double interval = 0.5;  // s of sim time between keyframes
  int oracle_every = 2;   // sample set on every oracle_every-th keyframe
};

struct LandmarkField {
  Eigen::AlignedBox3d region{Vec3d(-8, -8, 0), Vec3d(8, 8, 4)};
  int count = 350;
  std::uint64_t seed = 1;
};

/// Everything needed to synthesize one experiment's sensor streams.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;
  TrajectorySpec trajectory;
  ImuConfig imu;
  CameraModel camera;
  LandmarkField landmarks;
  OracleConfig oracle;
  KeyframeSchedule keyframes;
};

/// Parses a scenario JSON file. Throws ScenarioNotFound when the file is
/// missing and ConfigError on malformed content.
Scenario load_scenario(const std::filesystem::path& path);

void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace apvio

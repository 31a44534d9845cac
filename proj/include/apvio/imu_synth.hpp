#pragma once

#include <cstdint>
#include <vector>

#include "apvio/imu_types.hpp"
#include "apvio/trajectory.hpp"

namespace apvio {

struct ImuConfig {
  double rate = 240.0;  // Hz
  double gyro_noise_density = 0;   // rad/s/sqrt(Hz)
  double accel_noise_density = 0;  // m/s^2/sqrt(Hz)
  double gyro_bias_walk = 0;       // rad/s^2/sqrt(Hz)
  double accel_bias_walk = 0;      // m/s^3/sqrt(Hz)
  ImuBias initial_bias;
  Vec3d gravity = Vec3d(0, 0, -9.81);  // m/s^2

  ImuNoise noise() const { return ImuNoise{gyro_noise_density, accel_noise_density}; }
};

/// Samples the trajectory at the IMU rate and corrupts the ideal rate /
/// specific-force signals with bias (random walk) and discretized white
/// noise. Deterministic for a fixed seed. Records cover [0, duration]
/// inclusive at spacing 1/rate.
std::vector<ImuRecord> synthesize_imu(const TrajectorySpec& spec, const ImuConfig& cfg,
                                      std::uint64_t seed);

}  // namespace apvio

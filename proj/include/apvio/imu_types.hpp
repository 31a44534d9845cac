#pragma once

#include "apvio/so3.hpp"

namespace apvio {

/// One inertial sample: body angular rate and specific force.
struct ImuRecord {
  double t = 0;  // s
  Vec3d gyro = Vec3d::Zero();   // rad/s
  Vec3d accel = Vec3d::Zero();  // m/s^2
};

struct ImuBias {
  Vec3d gyro = Vec3d::Zero();   // rad/s
  Vec3d accel = Vec3d::Zero();  // m/s^2

  Eigen::Matrix<double, 6, 1> vector() const {
    Eigen::Matrix<double, 6, 1> v;
    v << gyro, accel;
    return v;
  }
};

/// Continuous-time white-noise densities (unit / sqrt(Hz)).
struct ImuNoise {
  double gyro_density = 0;
  double accel_density = 0;
};

}  // namespace apvio

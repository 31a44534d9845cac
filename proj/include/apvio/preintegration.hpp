#pragma once

#include <span>

#include "apvio/imu_types.hpp"
#include "apvio/pose.hpp"

// On-manifold IMU preintegration between keyframes: accumulated
// rotation/velocity/position deltas with first-order bias Jacobians and
// a 9x9 noise covariance (phi, v, p block order).

namespace apvio {

struct NavState {
  Posed pose;                       // body to world
  Vec3d velocity = Vec3d::Zero();   // world, m/s
  Vec3d gyro_bias = Vec3d::Zero();  // rad/s
  Vec3d accel_bias = Vec3d::Zero(); // m/s^2
  double stamp = 0;                 // s
};

struct PreintegratedImu {
  Mat3d delta_R = Mat3d::Identity();
  Vec3d delta_v = Vec3d::Zero();
  Vec3d delta_p = Vec3d::Zero();
  double dt_total = 0;
  Eigen::Matrix<double, 9, 9> noise_cov = Eigen::Matrix<double, 9, 9>::Zero();
  ImuBias bias_linearization;
  // d(delta_R, delta_v, delta_p) / d(gyro_bias, accel_bias)
  Eigen::Matrix<double, 9, 6> bias_jacobians = Eigen::Matrix<double, 9, 6>::Zero();

  Mat3d jac_R_bg() const { return bias_jacobians.block<3, 3>(0, 0); }
  Mat3d jac_v_bg() const { return bias_jacobians.block<3, 3>(3, 0); }
  Mat3d jac_v_ba() const { return bias_jacobians.block<3, 3>(3, 3); }
  Mat3d jac_p_bg() const { return bias_jacobians.block<3, 3>(6, 0); }
  Mat3d jac_p_ba() const { return bias_jacobians.block<3, 3>(6, 3); }
};

/// Integrates the intervals between consecutive records (midpoint
/// measurement average per interval) with the given fixed bias
/// linearization point. Throws NonMonotonicTime on unordered stamps.
PreintegratedImu preintegrate(std::span<const ImuRecord> records, const ImuBias& bias,
                              const ImuNoise& noise);

/// Propagates a state through a preintegrated factor (bias-corrected to
/// the state's own bias). The result zeroes imu_residual by construction.
NavState propagate(const NavState& state, const PreintegratedImu& pre, const Vec3d& gravity);

/// Preintegration residual [r_R; r_v; r_p], zero when (state_k, state_k1)
/// equal the noiseless propagation.
Eigen::Matrix<double, 9, 1> imu_residual(const PreintegratedImu& pre, const NavState& state_k,
                                         const NavState& state_k1, const Vec3d& gravity);

/// Residual plus Jacobians with respect to both states. Rotation blocks
/// follow the left-increment convention R <- exp(theta) R; vector blocks
/// are additive. Column order per state: [theta, p, v, bg, ba].
struct ImuResidualJacobians {
  Eigen::Matrix<double, 9, 1> residual;
  Eigen::Matrix<double, 9, 15> d_state_k;
  Eigen::Matrix<double, 9, 15> d_state_k1;
};
ImuResidualJacobians imu_residual_jacobians(const PreintegratedImu& pre,
                                            const NavState& state_k, const NavState& state_k1,
                                            const Vec3d& gravity);

}  // namespace apvio

#pragma once

#include "apvio/pose.hpp"

// Analytic reference trajectories for the simulator: a lemniscate of
// Bernoulli and per-axis Lissajous curves, with closed-form velocity,
// acceleration, and body angular rate.

namespace apvio {

enum class TrajectoryKind { kLemniscate, kLissajous };
enum class YawMode { kTangent, kFixed };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kLissajous;
  // Lemniscate uses amplitudes[0] as the lobe scale and channel 2 as a
  // low-amplitude vertical sinusoid; Lissajous is per-axis A sin(w t + phi).
  Vec3d amplitudes = Vec3d(5.0, 3.0, 0.5);
  Vec3d angular_freqs = Vec3d(0.2, 0.3, 0.4);  // rad/s
  Vec3d phases = Vec3d::Zero();                // rad
  Vec3d center = Vec3d::Zero();                // m
  double duration = 120.0;                     // s
  YawMode yaw_mode = YawMode::kTangent;
};

struct TrajectorySample {
  Posed pose;                  // body to world
  Vec3d velocity;              // world frame, m/s
  Vec3d angular_velocity_body; // rad/s
  Vec3d accel_body;            // world acceleration expressed in body axes, m/s^2
};

/// Evaluates the trajectory at time t in [0, duration].
/// Tangent yaw follows the horizontal velocity; pitch and roll oscillate
/// with fixed small amplitudes (well below the 30 degree attitude bound).
/// Throws OutOfRange outside the duration.
TrajectorySample sample_trajectory(const TrajectorySpec& spec, double t);

}  // namespace apvio

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "apvio/pose.hpp"

namespace apvio {

struct Landmark {
  int id = 0;
  Vec3d position = Vec3d::Zero();  // world, m
};

/// Pinhole camera. body_to_camera maps body-frame points into the
/// camera frame (z forward, x right, y down).
struct CameraModel {
  double fx = 240, fy = 240, cx = 240, cy = 240;  // px
  int width = 480, height = 480;                  // px
  Posed body_to_camera;
  double pixel_noise_std = 0;  // px
};

struct PixelObservation {
  int landmark_id = 0;
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
};

/// Noiseless pinhole projection of a world point for a body pose.
/// Empty when the point is behind the camera or outside the image.
std::optional<Eigen::Vector2d> project_point(const Posed& body_pose, const CameraModel& cam,
                                             const Vec3d& world_point);

/// Uniform landmarks in an axis-aligned box, deterministic per seed.
std::vector<Landmark> generate_landmarks(const Eigen::AlignedBox3d& region, int count,
                                         std::uint64_t seed);

/// Projects every visible landmark and adds Gaussian pixel noise drawn
/// from rng (in ascending landmark order, so consumption is reproducible).
std::vector<PixelObservation> observe_landmarks(const Posed& body_pose, const CameraModel& cam,
                                                std::span<const Landmark> landmarks,
                                                std::mt19937_64& rng);

/// Linear two-view triangulation (DLT). Throws DegenerateInput when the
/// system is rank-deficient (zero baseline, parallel rays).
Vec3d triangulate_two_view(const Posed& body_pose_a, const Eigen::Vector2d& pixel_a,
                           const Posed& body_pose_b, const Eigen::Vector2d& pixel_b,
                           const CameraModel& cam);

}  // namespace apvio

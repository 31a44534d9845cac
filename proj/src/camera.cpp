#include "apvio/camera.hpp"

#include <stdexcept>

#include "apvio/errors.hpp"

namespace apvio {

namespace {
constexpr double kMinDepth = 1e-6;
}

std::optional<Eigen::Vector2d> project_point(const Posed& body_pose, const CameraModel& cam,
                                             const Vec3d& world_point) {
  const Vec3d pt_body = body_pose.inverse().transform(world_point);
  const Vec3d pt_cam = cam.body_to_camera.transform(pt_body);
  if (pt_cam.z() <= kMinDepth) return std::nullopt;
  const Eigen::Vector2d px(cam.fx * pt_cam.x() / pt_cam.z() + cam.cx,
                           cam.fy * pt_cam.y() / pt_cam.z() + cam.cy);
  if (px.x() < 0 || px.x() >= cam.width || px.y() < 0 || px.y() >= cam.height) {
    return std::nullopt;
  }
  return px;
}

std::vector<Landmark> generate_landmarks(const Eigen::AlignedBox3d& region, int count,
                                         std::uint64_t seed) {
  if (count <= 0) throw std::invalid_argument("generate_landmarks: count must be > 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Landmark> landmarks;
  landmarks.reserve(count);
  const Vec3d extent = region.max() - region.min();
  for (int i = 0; i < count; ++i) {
    Vec3d p;
    for (int k = 0; k < 3; ++k) p[k] = region.min()[k] + extent[k] * unit(rng);
    landmarks.push_back(Landmark{i, p});
  }
  return landmarks;
}

std::vector<PixelObservation> observe_landmarks(const Posed& body_pose, const CameraModel& cam,
                                                std::span<const Landmark> landmarks,
                                                std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<PixelObservation> obs;
  for (const Landmark& lm : landmarks) {
    const auto px = project_point(body_pose, cam, lm.position);
    if (!px) continue;
    Eigen::Vector2d noisy = *px;
    noisy.x() += cam.pixel_noise_std * gauss(rng);
    noisy.y() += cam.pixel_noise_std * gauss(rng);
    obs.push_back(PixelObservation{lm.id, noisy});
  }
  return obs;
}

Vec3d triangulate_two_view(const Posed& body_pose_a, const Eigen::Vector2d& pixel_a,
                           const Posed& body_pose_b, const Eigen::Vector2d& pixel_b,
                           const CameraModel& cam) {
  // World-to-camera transforms and normalized image coordinates.
  const Posed w2c_a = cam.body_to_camera * body_pose_a.inverse();
  const Posed w2c_b = cam.body_to_camera * body_pose_b.inverse();
  const Eigen::Vector2d na((pixel_a.x() - cam.cx) / cam.fx, (pixel_a.y() - cam.cy) / cam.fy);
  const Eigen::Vector2d nb((pixel_b.x() - cam.cx) / cam.fx, (pixel_b.y() - cam.cy) / cam.fy);

  Eigen::Matrix<double, 4, 4> a;
  const auto fill_rows = [&a](int base, const Posed& w2c, const Eigen::Vector2d& n) {
    Eigen::Matrix<double, 3, 4> p;
    p.leftCols<3>() = w2c.rotation;
    p.rightCols<1>() = w2c.position;
    a.row(base) = n.x() * p.row(2) - p.row(0);
    a.row(base + 1) = n.y() * p.row(2) - p.row(1);
  };
  fill_rows(0, w2c_a, na);
  fill_rows(2, w2c_b, nb);

  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) < 1e-12 ||
      svd.singularValues()(2) < 1e-12 * svd.singularValues()(0)) {
    throw DegenerateInput("triangulate_two_view: rank-deficient system");
  }
  return h.head<3>() / h(3);
}

}  // namespace apvio

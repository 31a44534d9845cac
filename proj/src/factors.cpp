#include "apvio/factors.hpp"

#include <Eigen/Cholesky>

namespace apvio {

namespace {
constexpr double kMinDepth = 1e-6;
constexpr double kSqrt2 = 1.4142135623730951;
}  // namespace

std::optional<Eigen::Vector2d> reprojection_residual(const Eigen::Vector2d& pixel,
                                                     const NavState& state, const Vec3d& landmark,
                                                     const CameraModel& cam) {
  const Vec3d pt_cam =
      cam.body_to_camera.transform(state.pose.inverse().transform(landmark));
  if (pt_cam.z() <= kMinDepth) return std::nullopt;
  const Eigen::Vector2d projected(cam.fx * pt_cam.x() / pt_cam.z() + cam.cx,
                                  cam.fy * pt_cam.y() / pt_cam.z() + cam.cy);
  return pixel - projected;
}

std::optional<ReprojectionJacobians> reprojection_jacobians(const Eigen::Vector2d& pixel,
                                                            const NavState& state,
                                                            const Vec3d& landmark,
                                                            const CameraModel& cam) {
  const Mat3d r_wb_t = state.pose.rotation.transpose();
  const Vec3d offset = landmark - state.pose.position;
  const Vec3d pt_cam = cam.body_to_camera.transform((r_wb_t * offset).eval());
  if (pt_cam.z() <= kMinDepth) return std::nullopt;

  const double z_inv = 1.0 / pt_cam.z();
  Eigen::Matrix<double, 2, 3> d_proj;
  d_proj << cam.fx * z_inv, 0, -cam.fx * pt_cam.x() * z_inv * z_inv,
      0, cam.fy * z_inv, -cam.fy * pt_cam.y() * z_inv * z_inv;

  ReprojectionJacobians out;
  out.residual = pixel - Eigen::Vector2d(cam.fx * pt_cam.x() * z_inv + cam.cx,
                                         cam.fy * pt_cam.y() * z_inv + cam.cy);
  const Mat3d r_cb_r_wb_t = cam.body_to_camera.rotation * r_wb_t;
  // residual = pixel - proj, so every block carries the minus sign.
  out.d_landmark = -d_proj * r_cb_r_wb_t;
  out.d_position = d_proj * r_cb_r_wb_t;
  out.d_rotation = -d_proj * r_cb_r_wb_t * skew(offset);
  return out;
}

Eigen::Matrix<double, 6, 1> absolute_pose_residual(const UncertainPose& meas,
                                                   const NavState& state) {
  Eigen::Matrix<double, 6, 1> r;
  r.head<3>() = state.pose.position - meas.mean_position;
  r.tail<3>() =
      kSqrt2 * log_so3((meas.mean_rotation.transpose() * state.pose.rotation).eval());
  return r;
}

AbsolutePoseJacobians absolute_pose_jacobians(const UncertainPose& meas, const NavState& state) {
  AbsolutePoseJacobians out;
  out.residual = absolute_pose_residual(meas, state);
  out.d_rotation.setZero();
  out.d_position.setZero();
  out.d_position.topRows<3>() = Mat3d::Identity();
  const Vec3d phi = out.residual.tail<3>() / kSqrt2;
  out.d_rotation.bottomRows<3>() =
      kSqrt2 * left_jacobian_inv_so3(phi) * meas.mean_rotation.transpose();
  return out;
}

std::string to_string(GateStatus status) {
  switch (status) {
    case GateStatus::kAccepted: return "accepted";
    case GateStatus::kRejectedTrace: return "rejected_trace";
    case GateStatus::kRejectedMahalanobis: return "rejected_mahalanobis";
  }
  return "unknown";
}

GateResult gate(const UncertainPose& meas, const Posed& current_estimate, double tau1,
                double tau2, CovarianceMode mode) {
  GateResult out;
  out.trace = meas.pos_cov.trace();
  if (mode == CovarianceMode::kEstimated && out.trace > tau1) {
    out.status = GateStatus::kRejectedTrace;
    return out;
  }

  Eigen::LLT<Mat3d> llt(meas.pos_cov);
  if (llt.info() != Eigen::Success) {
    // Singular covariance: treated as a trace rejection.
    out.status = GateStatus::kRejectedTrace;
    return out;
  }
  const Vec3d diff = current_estimate.position - meas.mean_position;
  out.mahalanobis = std::sqrt(diff.dot(llt.solve(diff)));
  out.status = out.mahalanobis > tau2 ? GateStatus::kRejectedMahalanobis : GateStatus::kAccepted;
  return out;
}

}  // namespace apvio

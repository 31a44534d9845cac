#pragma once

#include <optional>
#include <string>

#include "apvio/camera.hpp"
#include "apvio/preintegration.hpp"
#include "apvio/uncertain_pose.hpp"

// Measurement residuals attached to sliding-window states and the
// uncertainty-based acceptance gate for absolute-pose measurements.

namespace apvio {

enum class CovarianceMode { kConstant, kEstimated };

/// Observed-minus-projected pixel residual. Empty when the landmark sits
/// at non-positive depth for the given state (factor deactivated, the
/// solve is not interrupted).
std::optional<Eigen::Vector2d> reprojection_residual(const Eigen::Vector2d& pixel,
                                                     const NavState& state, const Vec3d& landmark,
                                                     const CameraModel& cam);

struct ReprojectionJacobians {
  Eigen::Vector2d residual;
  Eigen::Matrix<double, 2, 3> d_rotation;  // left-increment on the state rotation
  Eigen::Matrix<double, 2, 3> d_position;
  Eigen::Matrix<double, 2, 3> d_landmark;
};
std::optional<ReprojectionJacobians> reprojection_jacobians(const Eigen::Vector2d& pixel,
                                                            const NavState& state,
                                                            const Vec3d& landmark,
                                                            const CameraModel& cam);

/// Absolute-pose residual [p - p_bar; sqrt(2) Log(R_bar^T R)]. Weighted by
/// blkdiag(pos_cov, rot_var I3), its squared Mahalanobis norm equals the
/// scalar chordal form ||[(p - p_bar); sqrt(2) eps]||^2 exactly.
Eigen::Matrix<double, 6, 1> absolute_pose_residual(const UncertainPose& meas,
                                                   const NavState& state);

struct AbsolutePoseJacobians {
  Eigen::Matrix<double, 6, 1> residual;
  Eigen::Matrix<double, 6, 3> d_rotation;
  Eigen::Matrix<double, 6, 3> d_position;
};
AbsolutePoseJacobians absolute_pose_jacobians(const UncertainPose& meas, const NavState& state);

enum class GateStatus { kAccepted, kRejectedTrace, kRejectedMahalanobis };

struct GateResult {
  GateStatus status = GateStatus::kAccepted;
  double trace = 0;        // tr(pos_cov)
  double mahalanobis = 0;  // position error under pos_cov
  bool accepted() const { return status == GateStatus::kAccepted; }
};

std::string to_string(GateStatus status);

/// Rejection heuristics: trace test first (estimated covariance only),
/// then the Mahalanobis distance between the latest backend position
/// estimate and the measured mean. A non-invertible covariance counts
/// as a trace rejection.
GateResult gate(const UncertainPose& meas, const Posed& current_estimate, double tau1,
                double tau2, CovarianceMode mode = CovarianceMode::kEstimated);

}  // namespace apvio

#pragma once

#include <span>
#include <vector>

#include "apvio/pose.hpp"
#include "apvio/so3.hpp"

// Aggregation of absolute-pose regressor sample sets into a single
// mean pose with an aleatoric/epistemic covariance split, plus the
// heteroscedastic negative log-likelihood loss the regressor trains on.

namespace apvio {

/// One forward pass of the regressor: pose plus the reported per-axis
/// positional variance (diagonal of the aleatoric covariance).
struct PoseSample {
  Vec3d position = Vec3d::Zero();
  Mat3d rotation = Mat3d::Identity();
  Vec3d aleatoric_pos_var = Vec3d::Zero();  // entries must be > 0
};

/// Output of |W| weight-sampled passes on one query image.
struct PoseSampleSet {
  std::vector<PoseSample> samples;  // |W| >= 2
  double kappa_inv = 1.0;           // rotational aleatoric variance, chordal units^2
};

/// Aggregated pose posterior. pos_cov == pos_cov_aleatoric + pos_cov_epistemic
/// and rot_var == rot_var_aleatoric + rot_var_epistemic by construction.
struct UncertainPose {
  Vec3d mean_position = Vec3d::Zero();
  Mat3d mean_rotation = Mat3d::Identity();
  Mat3d pos_cov = Mat3d::Zero();
  Mat3d pos_cov_aleatoric = Mat3d::Zero();
  Mat3d pos_cov_epistemic = Mat3d::Zero();
  double rot_var = 0.0;
  double rot_var_aleatoric = 0.0;
  double rot_var_epistemic = 0.0;
};

/// Divisor applied to the summed aleatoric covariances. Paper keeps the
/// |W|-1 of the epistemic estimator; Mean uses the conventional |W|.
enum class AleatoricDivisor { kPaper, kMean };

/// Closed-form minimizer of sum_i ||R_i - R||_F^2 over SO(3): SVD
/// projection of the arithmetic matrix mean with determinant sign fix.
/// Throws SingularAggregate when the minimizer is not unique.
Mat3d chordal_mean(std::span<const Mat3d> rotations);

/// Fuses a sample set into mean position, chordal-mean rotation, and the
/// covariance split. Requires at least 2 samples.
UncertainPose aggregate(const PoseSampleSet& set,
                        AleatoricDivisor divisor = AleatoricDivisor::kPaper);

/// One training prediction: position, 6D rotation, and log of the
/// per-axis positional variance (sigma_m = exp(s_m)).
struct PosePrediction {
  Vec3d position = Vec3d::Zero();
  Rot6d rotation6d{Vec3d::UnitX(), Vec3d::UnitY()};
  Vec3d log_var = Vec3d::Zero();
};

/// Gradients of pose_nll_loss with respect to the predicted positions
/// and log-variances, one entry per prediction.
struct PoseNllGradients {
  std::vector<Vec3d> d_position;
  std::vector<Vec3d> d_log_var;
};

/// Mean negative log-likelihood over N prediction/target pairs:
///   (1/N) sum_n 1/2 [ kappa ||R_n - Rhat_n||_F^2
///                     + sum_m (p_nm - phat_nm)^2 exp(-s_nm) + sum_m s_nm ]
///   + lambda_reg * params_sq_norm.
/// When grad is non-null the analytic gradients are written there.
double pose_nll_loss(std::span<const PosePrediction> predicted,
                     std::span<const Posed> target, double kappa, double lambda_reg,
                     double params_sq_norm, PoseNllGradients* grad = nullptr);

}  // namespace apvio

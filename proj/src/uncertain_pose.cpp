#include "apvio/uncertain_pose.hpp"

#include <cassert>
#include <stdexcept>

namespace apvio {

Mat3d chordal_mean(std::span<const Mat3d> rotations) {
  if (rotations.empty()) throw SingularAggregate("chordal_mean: empty input");
  Mat3d sum = Mat3d::Zero();
  for (const Mat3d& r : rotations) sum += r;
  sum /= static_cast<double>(rotations.size());

  Eigen::JacobiSVD<Mat3d> svd(sum, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3d sv = svd.singularValues();
  // The projection is the unique minimizer iff sigma_2 + sigma_3 > 0
  // (sign-fixed smallest singular value).
  if (sv(1) + sv(2) < 1e-12 * std::max(sv(0), 1.0)) {
    throw SingularAggregate("chordal_mean: degenerate sample spread, no unique mean");
  }
  const double d = (svd.matrixU() * svd.matrixV().transpose()).determinant();
  const Mat3d mean = svd.matrixU() * Vec3d(1.0, 1.0, d).asDiagonal() * svd.matrixV().transpose();
  if (!is_rotation(mean, 1e-6)) {
    throw SingularAggregate("chordal_mean: projection failed to reach SO(3)");
  }
  return mean;
}

UncertainPose aggregate(const PoseSampleSet& set, AleatoricDivisor divisor) {
  const std::size_t n = set.samples.size();
  if (n < 2) throw std::invalid_argument("aggregate: need at least 2 samples");

  UncertainPose out;
  std::vector<Mat3d> rotations;
  rotations.reserve(n);
  Vec3d mean_pos = Vec3d::Zero();
  for (const PoseSample& s : set.samples) {
    mean_pos += s.position;
    rotations.push_back(s.rotation);
  }
  mean_pos /= static_cast<double>(n);
  out.mean_position = mean_pos;
  out.mean_rotation = chordal_mean(rotations);

  const double bessel = static_cast<double>(n) - 1.0;
  const double aleatoric_div =
      divisor == AleatoricDivisor::kPaper ? bessel : static_cast<double>(n);

  Vec3d aleatoric_sum = Vec3d::Zero();
  Mat3d epistemic = Mat3d::Zero();
  double rot_spread = 0.0;
  for (const PoseSample& s : set.samples) {
    aleatoric_sum += s.aleatoric_pos_var;
    const Vec3d dev = s.position - mean_pos;
    epistemic += dev * dev.transpose();
    const double cd = chordal_distance(s.rotation, out.mean_rotation);
    rot_spread += cd * cd;
  }

  out.pos_cov_aleatoric = (aleatoric_sum / aleatoric_div).asDiagonal();
  out.pos_cov_epistemic = epistemic / bessel;
  out.pos_cov = out.pos_cov_aleatoric + out.pos_cov_epistemic;
  out.rot_var_aleatoric = set.kappa_inv;
  out.rot_var_epistemic = rot_spread / bessel;
  out.rot_var = out.rot_var_aleatoric + out.rot_var_epistemic;
  return out;
}

double pose_nll_loss(std::span<const PosePrediction> predicted,
                     std::span<const Posed> target, double kappa, double lambda_reg,
                     double params_sq_norm, PoseNllGradients* grad) {
  if (predicted.size() != target.size() || predicted.empty()) {
    throw std::invalid_argument("pose_nll_loss: prediction/target size mismatch");
  }
  if (kappa <= 0.0) throw std::invalid_argument("pose_nll_loss: kappa must be > 0");

  const double n = static_cast<double>(predicted.size());
  if (grad != nullptr) {
    grad->d_position.assign(predicted.size(), Vec3d::Zero());
    grad->d_log_var.assign(predicted.size(), Vec3d::Zero());
  }

  double acc = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const Mat3d r_hat = rot6d_to_rotation(predicted[i].rotation6d);
    const double rot_term = kappa * (target[i].rotation - r_hat).squaredNorm();

    double pos_term = 0.0;
    double logdet_term = 0.0;
    for (int m = 0; m < 3; ++m) {
      const double s = predicted[i].log_var[m];
      const double e = target[i].position[m] - predicted[i].position[m];
      const double inv_var = std::exp(-s);
      pos_term += e * e * inv_var;
      logdet_term += s;
      if (grad != nullptr) {
        grad->d_position[i][m] = -e * inv_var / n;
        grad->d_log_var[i][m] = 0.5 * (1.0 - e * e * inv_var) / n;
      }
    }
    acc += 0.5 * (rot_term + pos_term + logdet_term);
  }
  return acc / n + lambda_reg * params_sq_norm;
}

}  // namespace apvio

#include "apvio/preintegration.hpp"

#include <stdexcept>

#include "apvio/errors.hpp"

namespace apvio {

PreintegratedImu preintegrate(std::span<const ImuRecord> records, const ImuBias& bias,
                              const ImuNoise& noise) {
  if (records.empty()) throw std::invalid_argument("preintegrate: no records");

  PreintegratedImu pre;
  pre.bias_linearization = bias;

  Eigen::Matrix<double, 6, 6> meas_cov = Eigen::Matrix<double, 6, 6>::Zero();

  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const double dt = records[k + 1].t - records[k].t;
    if (dt <= 0) throw NonMonotonicTime("preintegrate: non-increasing timestamps");
    const double dt2 = dt * dt;

    // Midpoint measurement over the interval, bias-corrected.
    const Vec3d omega = 0.5 * (records[k].gyro + records[k + 1].gyro) - bias.gyro;
    const Vec3d accel = 0.5 * (records[k].accel + records[k + 1].accel) - bias.accel;

    const Mat3d dR = exp_so3((omega * dt).eval());
    const Mat3d jr = right_jacobian_so3((omega * dt).eval());
    const Mat3d accel_hat = skew(accel);
    const Mat3d R_acc_hat = pre.delta_R * accel_hat;

    // Covariance propagation, state order (phi, v, p).
    Eigen::Matrix<double, 9, 9> a = Eigen::Matrix<double, 9, 9>::Identity();
    a.block<3, 3>(0, 0) = dR.transpose();
    a.block<3, 3>(3, 0) = -R_acc_hat * dt;
    a.block<3, 3>(6, 0) = -0.5 * R_acc_hat * dt2;
    a.block<3, 3>(6, 3) = Mat3d::Identity() * dt;

    Eigen::Matrix<double, 9, 6> b = Eigen::Matrix<double, 9, 6>::Zero();
    b.block<3, 3>(0, 0) = jr * dt;
    b.block<3, 3>(3, 3) = pre.delta_R * dt;
    b.block<3, 3>(6, 3) = 0.5 * pre.delta_R * dt2;

    meas_cov.diagonal().head<3>().setConstant(noise.gyro_density * noise.gyro_density / dt);
    meas_cov.diagonal().tail<3>().setConstant(noise.accel_density * noise.accel_density / dt);
    pre.noise_cov = a * pre.noise_cov * a.transpose() + b * meas_cov * b.transpose();

    // Bias Jacobians; p before v before R so each update sees the
    // previous interval's values on the right-hand side.
    const Mat3d jac_R_bg = pre.jac_R_bg();
    pre.bias_jacobians.block<3, 3>(6, 0) +=
        pre.jac_v_bg() * dt - 0.5 * R_acc_hat * jac_R_bg * dt2;
    pre.bias_jacobians.block<3, 3>(6, 3) += pre.jac_v_ba() * dt - 0.5 * pre.delta_R * dt2;
    pre.bias_jacobians.block<3, 3>(3, 0) -= R_acc_hat * jac_R_bg * dt;
    pre.bias_jacobians.block<3, 3>(3, 3) -= pre.delta_R * dt;
    pre.bias_jacobians.block<3, 3>(0, 0) = dR.transpose() * jac_R_bg - jr * dt;

    // Mid-interval rotation for the specific-force terms; the start-of-
    // interval delta_R above is first-order equivalent for noise/bias.
    const Mat3d r_mid = pre.delta_R * exp_so3((omega * (0.5 * dt)).eval());
    pre.delta_p += pre.delta_v * dt + 0.5 * r_mid * accel * dt2;
    pre.delta_v += r_mid * accel * dt;
    pre.delta_R = pre.delta_R * dR;
    pre.dt_total += dt;
  }
  return pre;
}

namespace {

// Bias-corrected deltas at the states' bias estimate.
struct CorrectedDeltas {
  Mat3d delta_R;
  Vec3d delta_v;
  Vec3d delta_p;
  Vec3d delta_bg;  // correction argument, needed by the rotation Jacobian
};

CorrectedDeltas correct(const PreintegratedImu& pre, const NavState& state_k) {
  const Vec3d dbg = state_k.gyro_bias - pre.bias_linearization.gyro;
  const Vec3d dba = state_k.accel_bias - pre.bias_linearization.accel;
  CorrectedDeltas c;
  c.delta_bg = dbg;
  c.delta_R = pre.delta_R * exp_so3((pre.jac_R_bg() * dbg).eval());
  c.delta_v = pre.delta_v + pre.jac_v_bg() * dbg + pre.jac_v_ba() * dba;
  c.delta_p = pre.delta_p + pre.jac_p_bg() * dbg + pre.jac_p_ba() * dba;
  return c;
}

}  // namespace

NavState propagate(const NavState& state, const PreintegratedImu& pre, const Vec3d& gravity) {
  const CorrectedDeltas c = correct(pre, state);
  const double dt = pre.dt_total;
  NavState next = state;
  next.pose.rotation = state.pose.rotation * c.delta_R;
  next.velocity = state.velocity + gravity * dt + state.pose.rotation * c.delta_v;
  next.pose.position = state.pose.position + state.velocity * dt +
                       0.5 * gravity * dt * dt + state.pose.rotation * c.delta_p;
  next.stamp = state.stamp + dt;
  return next;
}

Eigen::Matrix<double, 9, 1> imu_residual(const PreintegratedImu& pre, const NavState& state_k,
                                         const NavState& state_k1, const Vec3d& gravity) {
  const CorrectedDeltas c = correct(pre, state_k);
  const double dt = pre.dt_total;
  const Mat3d r_k_t = state_k.pose.rotation.transpose();

  Eigen::Matrix<double, 9, 1> r;
  r.segment<3>(0) = log_so3((c.delta_R.transpose() * r_k_t * state_k1.pose.rotation).eval());
  r.segment<3>(3) = r_k_t * (state_k1.velocity - state_k.velocity - gravity * dt) - c.delta_v;
  r.segment<3>(6) = r_k_t * (state_k1.pose.position - state_k.pose.position -
                             state_k.velocity * dt - 0.5 * gravity * dt * dt) -
                    c.delta_p;
  return r;
}

ImuResidualJacobians imu_residual_jacobians(const PreintegratedImu& pre,
                                            const NavState& state_k, const NavState& state_k1,
                                            const Vec3d& gravity) {
  const CorrectedDeltas c = correct(pre, state_k);
  const double dt = pre.dt_total;
  const Mat3d r_k_t = state_k.pose.rotation.transpose();
  const Mat3d b_rt = c.delta_R.transpose() * r_k_t;

  ImuResidualJacobians out;
  out.d_state_k.setZero();
  out.d_state_k1.setZero();

  const Vec3d phi = log_so3((b_rt * state_k1.pose.rotation).eval());
  const Vec3d u = state_k1.velocity - state_k.velocity - gravity * dt;
  const Vec3d w = state_k1.pose.position - state_k.pose.position - state_k.velocity * dt -
                  0.5 * gravity * dt * dt;

  out.residual.segment<3>(0) = phi;
  out.residual.segment<3>(3) = r_k_t * u - c.delta_v;
  out.residual.segment<3>(6) = r_k_t * w - c.delta_p;

  const Mat3d jl_inv = left_jacobian_inv_so3(phi);

  // r_R blocks
  out.d_state_k.block<3, 3>(0, 0) = -jl_inv * b_rt;
  out.d_state_k.block<3, 3>(0, 9) =
      -jl_inv * right_jacobian_so3((pre.jac_R_bg() * c.delta_bg).eval()) * pre.jac_R_bg();
  out.d_state_k1.block<3, 3>(0, 0) = jl_inv * b_rt;

  // r_v blocks
  out.d_state_k.block<3, 3>(3, 0) = r_k_t * skew(u);
  out.d_state_k.block<3, 3>(3, 6) = -r_k_t;
  out.d_state_k.block<3, 3>(3, 9) = -pre.jac_v_bg();
  out.d_state_k.block<3, 3>(3, 12) = -pre.jac_v_ba();
  out.d_state_k1.block<3, 3>(3, 6) = r_k_t;

  // r_p blocks
  out.d_state_k.block<3, 3>(6, 0) = r_k_t * skew(w);
  out.d_state_k.block<3, 3>(6, 3) = -r_k_t;
  out.d_state_k.block<3, 3>(6, 6) = -r_k_t * dt;
  out.d_state_k.block<3, 3>(6, 9) = -pre.jac_p_bg();
  out.d_state_k.block<3, 3>(6, 12) = -pre.jac_p_ba();
  out.d_state_k1.block<3, 3>(6, 3) = r_k_t;

  return out;
}

}  // namespace apvio

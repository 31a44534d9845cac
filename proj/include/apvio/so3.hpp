#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "apvio/errors.hpp"

// SO(3) primitives: exponential / logarithm maps, the 6D rotation
// parameterization, chordal distances and the SO(3) Jacobians the
// estimator needs. Rotations are plain 3x3 matrices; validity is a
// convention checked by is_rotation(), not a wrapper type.

namespace apvio {

template <typename Scalar>
using Mat3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

using Mat3d = Mat3<double>;
using Vec3d = Vec3<double>;

/// Skew-symmetric matrix such that skew(a) * b == a.cross(b).
template <typename Scalar>
inline Mat3<Scalar> skew(const Vec3<Scalar>& v) {
  Mat3<Scalar> s;
  s << Scalar(0), -v.z(), v.y(),
       v.z(), Scalar(0), -v.x(),
      -v.y(), v.x(), Scalar(0);
  return s;
}

/// Inverse of skew for an exactly skew-symmetric matrix.
template <typename Scalar>
inline Vec3<Scalar> vee(const Mat3<Scalar>& m) {
  return Vec3<Scalar>(m(2, 1), m(0, 2), m(1, 0));
}

/// vee of the antisymmetric part, robust to symmetric numerical dirt.
template <typename Scalar>
inline Vec3<Scalar> vee_sym(const Mat3<Scalar>& m) {
  return Scalar(0.5) * Vec3<Scalar>(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
}

/// Exponential map so(3) -> SO(3), Rodrigues formula with a series
/// branch near zero. exp_so3(0) == I.
template <typename Scalar>
inline Mat3<Scalar> exp_so3(const Vec3<Scalar>& omega) {
  const Scalar theta_sq = omega.squaredNorm();
  const Mat3<Scalar> w = skew(omega);
  Scalar a, b;  // R = I + a*w + b*w^2
  if (theta_sq < Scalar(1e-8)) {
    a = Scalar(1) - theta_sq / Scalar(6);
    b = Scalar(0.5) - theta_sq / Scalar(24);
  } else {
    const Scalar theta = std::sqrt(theta_sq);
    a = std::sin(theta) / theta;
    b = (Scalar(1) - std::cos(theta)) / theta_sq;
  }
  return Mat3<Scalar>::Identity() + a * w + b * w * w;
}

/// Logarithm map SO(3) -> so(3). Returns omega with ||omega|| <= pi.
/// Near pi the axis is recovered from the largest diagonal entry of
/// the symmetric part, which stays well conditioned where the sinc
/// form cancels catastrophically.
template <typename Scalar>
inline Vec3<Scalar> log_so3(const Mat3<Scalar>& r) {
  const Scalar trace = r.trace();
  const Scalar cos_theta = std::clamp((trace - Scalar(1)) * Scalar(0.5), Scalar(-1), Scalar(1));
  const Scalar theta = std::acos(cos_theta);
  // vee(R - R^T) = 2 sin(theta) * axis
  const Vec3<Scalar> axis_x_2sin = vee((r - r.transpose()).eval());

  if (theta < Scalar(1e-6)) {
    // omega = theta/(2 sin theta) * vee(R - R^T) ~ (1/2 + theta^2/12) * vee
    return (Scalar(0.5) + theta * theta / Scalar(12)) * axis_x_2sin;
  }
  if (theta > Scalar(3.0)) {
    // Near pi: u u^T = (R_sym - cos I)/(1 - cos); take the strongest column.
    const Mat3<Scalar> sym = Scalar(0.5) * (r + r.transpose());
    const Scalar one_m_cos = Scalar(1) - cos_theta;
    int k = 0;
    sym.diagonal().maxCoeff(&k);
    Vec3<Scalar> u;
    u[k] = std::sqrt(std::max((sym(k, k) - cos_theta) / one_m_cos, Scalar(0)));
    for (int i = 0; i < 3; ++i) {
      if (i != k) u[i] = sym(i, k) / (one_m_cos * u[k]);
    }
    u.normalize();
    if (u.dot(axis_x_2sin) < Scalar(0)) u = -u;
    return theta * u;
  }
  return (theta / (Scalar(2) * std::sin(theta))) * axis_x_2sin;
}

/// Right Jacobian of SO(3): Exp(phi + d) ~ Exp(phi) Exp(Jr(phi) d).
template <typename Scalar>
inline Mat3<Scalar> right_jacobian_so3(const Vec3<Scalar>& phi) {
  const Scalar theta_sq = phi.squaredNorm();
  const Mat3<Scalar> w = skew(phi);
  Scalar a, b;  // Jr = I - a*w + b*w^2
  if (theta_sq < Scalar(1e-8)) {
    a = Scalar(0.5) - theta_sq / Scalar(24);
    b = Scalar(1) / Scalar(6) - theta_sq / Scalar(120);
  } else {
    const Scalar theta = std::sqrt(theta_sq);
    a = (Scalar(1) - std::cos(theta)) / theta_sq;
    b = (theta - std::sin(theta)) / (theta_sq * theta);
  }
  return Mat3<Scalar>::Identity() - a * w + b * w * w;
}

/// Inverse of the left Jacobian: Log(Exp(d) Exp(phi)) ~ phi + Jl_inv(phi) d.
template <typename Scalar>
inline Mat3<Scalar> left_jacobian_inv_so3(const Vec3<Scalar>& phi) {
  const Scalar theta_sq = phi.squaredNorm();
  const Mat3<Scalar> w = skew(phi);
  Scalar c;  // Jl_inv = I - w/2 + c*w^2
  if (theta_sq < Scalar(1e-8)) {
    c = Scalar(1) / Scalar(12) + theta_sq / Scalar(720);
  } else {
    const Scalar theta = std::sqrt(theta_sq);
    c = Scalar(1) / theta_sq -
        (Scalar(1) + std::cos(theta)) / (Scalar(2) * theta * std::sin(theta));
  }
  return Mat3<Scalar>::Identity() - Scalar(0.5) * w + c * w * w;
}

/// Inverse of the right Jacobian: Log(Exp(phi) Exp(d)) ~ phi + Jr_inv(phi) d.
template <typename Scalar>
inline Mat3<Scalar> right_jacobian_inv_so3(const Vec3<Scalar>& phi) {
  return left_jacobian_inv_so3<Scalar>((-phi).eval());
}

/// Orthonormality / determinant check for a rotation candidate.
template <typename Scalar>
inline bool is_rotation(const Mat3<Scalar>& r, Scalar tol = Scalar(1e-9)) {
  const Scalar ortho = (r.transpose() * r - Mat3<Scalar>::Identity()).norm();
  return ortho < tol && std::abs(r.determinant() - Scalar(1)) < tol;
}

/// Nearest rotation in Frobenius norm: SVD projection with determinant
/// sign fix. No degeneracy check; see chordal_mean for the checked path.
template <typename Scalar>
inline Mat3<Scalar> project_to_so3(const Mat3<Scalar>& m) {
  Eigen::JacobiSVD<Mat3<Scalar>> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Scalar d = (svd.matrixU() * svd.matrixV().transpose()).determinant();
  return svd.matrixU() * Vec3<Scalar>(Scalar(1), Scalar(1), d).asDiagonal() *
         svd.matrixV().transpose();
}

/// Frobenius distance between two rotations.
/// Satisfies ||R1 - R2||_F = 2 sqrt(2) sin(eps/2) with eps the geodesic angle.
template <typename Scalar>
inline Scalar chordal_distance(const Mat3<Scalar>& r1, const Mat3<Scalar>& r2) {
  return (r1 - r2).norm();
}

/// Two free 3-vectors; a rotation's first two columns before re-orthonormalization.
template <typename Scalar>
struct Rot6 {
  Vec3<Scalar> a1;
  Vec3<Scalar> a2;
};

using Rot6d = Rot6<double>;

/// Gram-Schmidt recovery of the full rotation from the 6D parameterization.
/// Throws DegenerateInput when a1 vanishes or a2 is (near-)parallel to a1.
template <typename Scalar>
inline Mat3<Scalar> rot6d_to_rotation(const Rot6<Scalar>& r6) {
  constexpr Scalar kTol = Scalar(1e-8);
  const Scalar n1 = r6.a1.norm();
  if (n1 < kTol) throw DegenerateInput("rot6d_to_rotation: a1 near zero");
  const Vec3<Scalar> b1 = r6.a1 / n1;
  const Vec3<Scalar> u2 = r6.a2 - b1.dot(r6.a2) * b1;
  const Scalar n2 = u2.norm();
  if (n2 < kTol) throw DegenerateInput("rot6d_to_rotation: a2 parallel to a1");
  const Vec3<Scalar> b2 = u2 / n2;
  Mat3<Scalar> r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b1.cross(b2);
  return r;
}

/// First two columns of a rotation; inverse of rot6d_to_rotation on SO(3).
template <typename Scalar>
inline Rot6<Scalar> rotation_to_rot6d(const Mat3<Scalar>& r) {
  return Rot6<Scalar>{r.col(0), r.col(1)};
}

}  // namespace apvio

#include "apvio/trajectory.hpp"

#include <array>
#include <cmath>

#include "apvio/errors.hpp"

namespace apvio {
namespace {

// Order-2 truncated Taylor scalar: carries f(t), f'(t), f''(t) through
// arithmetic so trajectory derivatives stay exact to machine precision.
struct Jet2 {
  double f = 0, d = 0, dd = 0;
};

Jet2 jet_var(double t) { return {t, 1.0, 0.0}; }
Jet2 jet_const(double c) { return {c, 0.0, 0.0}; }

Jet2 operator+(const Jet2& a, const Jet2& b) { return {a.f + b.f, a.d + b.d, a.dd + b.dd}; }
Jet2 operator-(const Jet2& a, const Jet2& b) { return {a.f - b.f, a.d - b.d, a.dd - b.dd}; }
Jet2 operator*(const Jet2& a, const Jet2& b) {
  return {a.f * b.f, a.d * b.f + a.f * b.d, a.dd * b.f + 2.0 * a.d * b.d + a.f * b.dd};
}
Jet2 operator*(double c, const Jet2& a) { return {c * a.f, c * a.d, c * a.dd}; }
Jet2 operator/(const Jet2& a, const Jet2& b) {
  const double inv = 1.0 / b.f;
  const double f = a.f * inv;
  const double d = (a.d - f * b.d) * inv;
  const double dd = (a.dd - 2.0 * d * b.d - f * b.dd) * inv;
  return {f, d, dd};
}
Jet2 sin(const Jet2& a) {
  const double s = std::sin(a.f), c = std::cos(a.f);
  return {s, c * a.d, -s * a.d * a.d + c * a.dd};
}
Jet2 cos(const Jet2& a) {
  const double s = std::sin(a.f), c = std::cos(a.f);
  return {c, -s * a.d, -c * a.d * a.d - s * a.dd};
}

using JVec3 = std::array<Jet2, 3>;
using JMat3 = std::array<Jet2, 9>;  // row-major

JMat3 jmul(const JMat3& a, const JMat3& b) {
  JMat3 out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Jet2 acc = a[3 * i] * b[j];
      acc = acc + a[3 * i + 1] * b[3 + j];
      acc = acc + a[3 * i + 2] * b[6 + j];
      out[3 * i + j] = acc;
    }
  }
  return out;
}

JMat3 jet_rot_z(const Jet2& a) {
  const Jet2 c = cos(a), s = sin(a), z = jet_const(0), o = jet_const(1);
  return {c, jet_const(0) - s, z, s, c, z, z, z, o};
}
JMat3 jet_rot_y(const Jet2& a) {
  const Jet2 c = cos(a), s = sin(a), z = jet_const(0), o = jet_const(1);
  return {c, z, s, z, o, z, jet_const(0) - s, z, c};
}
JMat3 jet_rot_x(const Jet2& a) {
  const Jet2 c = cos(a), s = sin(a), z = jet_const(0), o = jet_const(1);
  return {o, z, z, z, c, jet_const(0) - s, z, s, c};
}

// Position of the curve (relative to center) as jets in t.
JVec3 position_jets(const TrajectorySpec& spec, const Jet2& t) {
  JVec3 p;
  if (spec.kind == TrajectoryKind::kLemniscate) {
    const double a = spec.amplitudes[0];
    const Jet2 theta = spec.angular_freqs[0] * t + jet_const(spec.phases[0]);
    const Jet2 s = sin(theta), c = cos(theta);
    const Jet2 denom = jet_const(1) + s * s;
    p[0] = a * (c / denom);
    p[1] = a * ((s * c) / denom);
    p[2] = spec.amplitudes[2] * sin(spec.angular_freqs[2] * t + jet_const(spec.phases[2]));
  } else {
    for (int k = 0; k < 3; ++k) {
      p[k] = spec.amplitudes[k] * sin(spec.angular_freqs[k] * t + jet_const(spec.phases[k]));
    }
  }
  return p;
}

// Pitch/roll bob amplitudes, radians. Bounded far below the 30 deg cap.
constexpr double kPitchAmplitude = 0.12;
constexpr double kRollAmplitude = 0.10;

}  // namespace

TrajectorySample sample_trajectory(const TrajectorySpec& spec, double t) {
  if (t < -1e-12 || t > spec.duration + 1e-12) {
    throw OutOfRange("sample_trajectory: t outside [0, duration]");
  }

  const Jet2 jt = jet_var(t);
  const JVec3 p = position_jets(spec, jt);

  TrajectorySample out;
  out.pose.position = spec.center + Vec3d(p[0].f, p[1].f, p[2].f);
  out.velocity = Vec3d(p[0].d, p[1].d, p[2].d);
  const Vec3d accel_world(p[0].dd, p[1].dd, p[2].dd);

  // Tangent mode: yaw follows the horizontal velocity (its rate needs
  // the acceleration) and pitch/roll bob as small sinusoids. Fixed mode
  // holds the attitude constant.
  Jet2 yaw = jet_const(0);
  Jet2 pitch = jet_const(0);
  Jet2 roll = jet_const(0);
  if (spec.yaw_mode == YawMode::kTangent) {
    const double vx = p[0].d, vy = p[1].d;
    const double speed_sq = vx * vx + vy * vy;
    yaw.f = std::atan2(vy, vx);
    yaw.d = speed_sq > 1e-12 ? (vx * p[1].dd - vy * p[0].dd) / speed_sq : 0.0;
    const double base_w = spec.angular_freqs[0];
    pitch = kPitchAmplitude * sin((0.9 * base_w + 0.31) * jt + jet_const(spec.phases[1]));
    roll = kRollAmplitude * sin((1.1 * base_w + 0.47) * jt + jet_const(spec.phases[2]));
  }

  const JMat3 jr = jmul(jmul(jet_rot_z(yaw), jet_rot_y(pitch)), jet_rot_x(roll));
  Mat3d r, r_dot;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      r(i, j) = jr[3 * i + j].f;
      r_dot(i, j) = jr[3 * i + j].d;
    }
  }
  out.pose.rotation = r;
  out.angular_velocity_body = vee_sym((r.transpose() * r_dot).eval());
  out.accel_body = r.transpose() * accel_world;
  return out;
}

}  // namespace apvio

#pragma once

#include "apvio/so3.hpp"

namespace apvio {

/// Rigid transform on SE(3). transform() maps a point from the frame
/// this pose describes into its parent frame: x_parent = R x + p.
template <typename Scalar>
struct Pose {
  Mat3<Scalar> rotation = Mat3<Scalar>::Identity();
  Vec3<Scalar> position = Vec3<Scalar>::Zero();

  static Pose Identity() { return Pose{}; }

  Vec3<Scalar> transform(const Vec3<Scalar>& x) const { return rotation * x + position; }

  Pose compose(const Pose& other) const {
    return Pose{rotation * other.rotation, rotation * other.position + position};
  }

  Pose inverse() const {
    Pose inv;
    inv.rotation = rotation.transpose();
    inv.position = -(inv.rotation * position);
    return inv;
  }
};

using Posed = Pose<double>;

template <typename Scalar>
inline Pose<Scalar> operator*(const Pose<Scalar>& a, const Pose<Scalar>& b) {
  return a.compose(b);
}

}  // namespace apvio

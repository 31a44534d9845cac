#pragma once

#include <functional>
#include <random>
#include <span>
#include <vector>

#include "apvio/sliding_window.hpp"
#include "apvio/so3.hpp"

// Test-side reference implementations, kept independent of the library
// paths they verify.

namespace apvio::testing {

inline Vec3d random_vec3(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  return scale * Vec3d(gauss(rng), gauss(rng), gauss(rng));
}

inline Mat3d random_rotation(std::mt19937_64& rng, double max_angle = M_PI * 0.95) {
  std::uniform_real_distribution<double> angle(0.0, max_angle);
  Vec3d axis = random_vec3(rng);
  while (axis.norm() < 1e-6) axis = random_vec3(rng);
  return exp_so3(Vec3d(angle(rng) * axis.normalized()));
}

/// Brute-force chordal mean: multistart local descent over axis-angle
/// increments with a shrinking step, no closed form involved.
inline Mat3d brute_force_chordal_mean(std::span<const Mat3d> rotations,
                                      std::mt19937_64& rng) {
  const auto cost = [&](const Mat3d& r) {
    double c = 0;
    for (const Mat3d& s : rotations) c += (s - r).squaredNorm();
    return c;
  };
  const auto refine = [&](Mat3d r) {
    double step = 0.5;
    double best = cost(r);
    while (step > 1e-9) {
      bool improved = false;
      for (int axis = 0; axis < 3; ++axis) {
        for (double sign : {1.0, -1.0}) {
          const Mat3d cand = exp_so3(Vec3d(sign * step * Vec3d::Unit(axis))) * r;
          const double c = cost(cand);
          if (c < best) {
            best = c;
            r = cand;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    return std::pair<Mat3d, double>{r, best};
  };

  std::vector<Mat3d> starts(rotations.begin(), rotations.end());
  for (int i = 0; i < 8; ++i) starts.push_back(random_rotation(rng));
  Mat3d best_r = starts.front();
  double best_c = std::numeric_limits<double>::infinity();
  for (const Mat3d& s : starts) {
    const auto [r, c] = refine(s);
    if (c < best_c) {
      best_c = c;
      best_r = r;
    }
  }
  return best_r;
}

/// Central finite-difference Jacobian of a vector function.
inline Eigen::MatrixXd numeric_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                                        int input_dim, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(Eigen::VectorXd::Zero(input_dim));
  Eigen::MatrixXd jac(f0.size(), input_dim);
  for (int j = 0; j < input_dim; ++j) {
    Eigen::VectorXd dp = Eigen::VectorXd::Zero(input_dim);
    dp[j] = h;
    const Eigen::VectorXd fp = f(dp);
    dp[j] = -h;
    const Eigen::VectorXd fm = f(dp);
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

/// Plain dense Gauss-Newton on a graph's whitened residuals with
/// finite-difference Jacobians; an implementation-independent reference
/// for the sparse Levenberg-Marquardt path.
inline void dense_gauss_newton(SlidingWindowGraph& graph, int max_iterations = 30,
                               double step_tol = 1e-12) {
  for (int it = 0; it < max_iterations; ++it) {
    const int dim = graph.problem_dimension();
    const auto residual_at = [&](const Eigen::VectorXd& delta) {
      SlidingWindowGraph probe = graph;
      probe.apply_increment(delta);
      return probe.whitened_residuals();
    };
    const Eigen::VectorXd r = graph.whitened_residuals();
    const Eigen::MatrixXd jac = numeric_jacobian(residual_at, dim, 1e-7);
    const Eigen::MatrixXd h = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    const Eigen::VectorXd delta =
        (h + 1e-12 * Eigen::MatrixXd::Identity(dim, dim)).ldlt().solve(-g);
    graph.apply_increment(delta);
    if (delta.lpNorm<Eigen::Infinity>() < step_tol) break;
  }
}

/// Distance between two graphs' states in the retraction metric.
inline double state_space_distance(const SlidingWindowGraph& a, const SlidingWindowGraph& b) {
  double d = 0;
  const auto& sa = a.states();
  const auto& sb = b.states();
  for (std::size_t i = 0; i < sa.size(); ++i) {
    d = std::max(d, log_so3((sa[i].pose.rotation * sb[i].pose.rotation.transpose()).eval())
                        .lpNorm<Eigen::Infinity>());
    d = std::max(d, (sa[i].pose.position - sb[i].pose.position).lpNorm<Eigen::Infinity>());
    d = std::max(d, (sa[i].velocity - sb[i].velocity).lpNorm<Eigen::Infinity>());
    d = std::max(d, (sa[i].gyro_bias - sb[i].gyro_bias).lpNorm<Eigen::Infinity>());
    d = std::max(d, (sa[i].accel_bias - sb[i].accel_bias).lpNorm<Eigen::Infinity>());
  }
  const auto la = a.landmark_positions();
  const auto lb = b.landmark_positions();
  for (const auto& [id, pos] : la) {
    const auto it = lb.find(id);
    if (it != lb.end()) d = std::max(d, (pos - it->second).lpNorm<Eigen::Infinity>());
  }
  return d;
}

}  // namespace apvio::testing

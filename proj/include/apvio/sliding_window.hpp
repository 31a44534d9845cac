#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Sparse>

#include "apvio/factors.hpp"
#include "apvio/preintegration.hpp"
#include "apvio/uncertain_pose.hpp"

// Sliding-window MAP estimator: keyframe nav states and landmarks tied
// together by preintegrated IMU, reprojection, absolute-pose, bias
// random-walk, and prior factors, optimized by Levenberg-Marquardt on
// SO(3) x R^n (rotations updated by left-multiplied exponentials, all
// vector blocks additive).

namespace apvio {

struct SolverSettings {
  int max_iterations = 50;
  double cost_decrease_tol = 1e-8;  // relative, on accepted steps
  double gradient_tol = 1e-10;      // infinity norm of J^T r
  double initial_lambda = 1e-6;
  double lambda_increase = 10.0;
  double lambda_decrease = 0.3;
  double max_lambda = 1e12;
};

enum class SolveTermination {
  kConverged,
  kSmallGradient,
  kMaxIterations,
  kNotConverged,      // stalled before meeting tolerances; best iterate kept
  kIndefiniteSystem,  // factorization kept failing despite damping
};

std::string to_string(SolveTermination t);

struct SolveStats {
  double initial_cost = 0;
  double final_cost = 0;
  int iterations = 0;  // accepted steps
  SolveTermination termination = SolveTermination::kConverged;
  bool failed() const { return termination == SolveTermination::kIndefiniteSystem; }
};

struct GraphConfig {
  int window_size = 20;  // keyframes; <= 0 keeps every state (batch mode)
  SolverSettings solver;
  Vec3d gravity = Vec3d(0, 0, -9.81);
  ImuNoise imu_noise;
  double gyro_bias_walk = 1e-5;   // rad/s^2/sqrt(Hz)
  double accel_bias_walk = 1e-4;  // m/s^3/sqrt(Hz)
  double reproj_sigma_px = 1.0;
  double min_landmark_depth = 0.1;             // m
  double max_triangulation_reproj_px = 5.0;    // px
  // First-keyframe prior.
  double prior_pos_sigma = 0.01;
  double prior_rot_sigma = 0.01;
  double prior_vel_sigma = 0.05;
  double prior_gyro_bias_sigma = 0.01;
  double prior_accel_bias_sigma = 0.05;
  // Absolute-pose measurement handling.
  CovarianceMode covariance_mode = CovarianceMode::kEstimated;
  bool rejection_enabled = true;
  double tau1 = 1.0;
  double tau2 = 0.4;
  Vec3d constant_pos_cov_diag = Vec3d(0.2, 0.2, 0.2);
  double constant_rot_var = 1.0;
  AleatoricDivisor aleatoric_divisor = AleatoricDivisor::kPaper;
};

struct KeyframeSummary {
  int keyframe_id = 0;
  double stamp = 0;
  bool had_oracle = false;
  std::optional<GateResult> gate;  // set whenever a sample set was supplied
  bool abs_factor_added = false;
  int num_imu_factors = 0;
  int num_reproj_factors = 0;
  int num_abs_factors = 0;
  int num_landmarks = 0;
  SolveStats solve;
};

class SlidingWindowGraph {
 public:
  SlidingWindowGraph(CameraModel cam, GraphConfig cfg);

  /// Appends a keyframe: propagates from the previous state through the
  /// IMU segment, attaches factors (absolute pose only when a sample set
  /// is supplied and survives the gate), optimizes, and trims the window.
  /// The first call must supply initial_state. Throws NonMonotonicTime
  /// on out-of-order stamps.
  KeyframeSummary add_keyframe(double stamp, std::span<const ImuRecord> imu_segment,
                               std::span<const PixelObservation> observations,
                               const std::optional<PoseSampleSet>& oracle_set = std::nullopt,
                               const NavState* initial_state = nullptr);

  /// Levenberg-Marquardt over the current window. Never increases cost.
  SolveStats optimize();

  const std::vector<NavState>& states() const { return states_; }
  const std::vector<int>& keyframe_ids() const { return kf_ids_; }
  const NavState& latest_state() const { return states_.back(); }
  std::map<int, Vec3d> landmark_positions() const;
  int num_reprojection_factors() const;
  int num_imu_factors() const { return static_cast<int>(imu_factors_.size()); }
  int num_absolute_pose_factors() const { return static_cast<int>(abs_factors_.size()); }
  const GraphConfig& config() const { return cfg_; }

  /// Drops every prior factor (turns the problem pure-relative; used by
  /// tests that need a unique non-anchored minimizer).
  void remove_priors() { priors_.clear(); }

  // Flat-vector view of the optimization problem, used by the solver and
  // by independent reference solvers in tests. Ordering: 15 per state
  // [theta, p, v, bg, ba], then 3 per solvable landmark (ascending id).
  int problem_dimension() const;
  std::vector<int> solvable_landmark_ids() const;
  Eigen::VectorXd whitened_residuals() const;
  void apply_increment(const Eigen::VectorXd& delta);
  double current_cost() const;

 private:
  struct PriorFactorData {
    int kf_id = 0;
    NavState mean;
    Eigen::Matrix<double, 15, 15> sqrt_info;  // whitener: r_w = sqrt_info * r
  };
  struct ImuFactorData {
    int kf_i = 0, kf_j = 0;
    PreintegratedImu pre;
    Eigen::Matrix<double, 9, 9> sqrt_info;
  };
  struct BiasWalkFactorData {
    int kf_i = 0, kf_j = 0;
    Eigen::Matrix<double, 6, 1> inv_sigma;  // diagonal whitener
  };
  struct AbsFactorData {
    int kf_id = 0;
    UncertainPose meas;
    Mat3d pos_sqrt_info;
    double rot_inv_sigma = 1.0;
  };
  struct LandmarkObs {
    int kf_id = 0;
    Eigen::Vector2d pixel;
  };
  struct LandmarkData {
    Vec3d position = Vec3d::Zero();
    bool initialized = false;
    std::vector<LandmarkObs> obs;
  };

  struct Values {
    std::vector<NavState> states;
    std::vector<Vec3d> lm_positions;
  };
  struct Linearization {
    Eigen::SparseMatrix<double> hessian;
    Eigen::VectorXd gradient;
    double cost = 0;
  };

  int state_index(int kf_id) const;
  void attach_first(const NavState& state, double stamp);
  void try_initialize_landmarks();
  void drop_oldest();
  Eigen::Matrix<double, 15, 15> marginal_state_covariance(int state_idx) const;

  Values snapshot() const;
  void restore(const Values& v);
  Values retracted(const Values& v, const Eigen::VectorXd& delta) const;
  double cost_at(const Values& v, const std::vector<bool>& active) const;
  std::vector<bool> active_reprojections(const Values& v) const;
  Linearization linearize(const Values& v, const std::vector<bool>& active) const;

  CameraModel cam_;
  GraphConfig cfg_;
  std::vector<int> kf_ids_;
  std::vector<NavState> states_;
  std::vector<PriorFactorData> priors_;
  std::vector<ImuFactorData> imu_factors_;
  std::vector<BiasWalkFactorData> bias_factors_;
  std::vector<AbsFactorData> abs_factors_;
  std::map<int, LandmarkData> landmarks_;
  int next_kf_id_ = 0;
};

}  // namespace apvio

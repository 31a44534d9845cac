#include <doctest.h>

#include "apvio/imu_synth.hpp"
#include "apvio/sliding_window.hpp"
#include "apvio/trajectory.hpp"
#include "helpers.hpp"

using namespace apvio;

namespace {

TrajectorySpec drive_spec() {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kLissajous;
  spec.amplitudes = Vec3d(6.0, 4.0, 0.8);
  spec.angular_freqs = Vec3d(0.21, 0.34, 0.5);
  spec.phases = Vec3d(M_PI / 2, 0.0, 0.3);
  spec.center = Vec3d(0.0, 0.0, 2.0);
  spec.duration = 60.0;
  spec.yaw_mode = YawMode::kTangent;
  return spec;
}

CameraModel drive_camera(double pixel_noise = 0.0) {
  CameraModel cam;
  cam.fx = cam.fy = 240;
  cam.cx = cam.cy = 240;
  cam.width = cam.height = 480;
  cam.body_to_camera.rotation << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  cam.body_to_camera.position = Vec3d(0, 0, -0.1);
  cam.pixel_noise_std = pixel_noise;
  return cam;
}

GraphConfig drive_config(const ImuConfig& imu) {
  GraphConfig gc;
  gc.window_size = 20;
  gc.gravity = imu.gravity;
  gc.imu_noise = imu.noise();
  gc.gyro_bias_walk = imu.gyro_bias_walk;
  gc.accel_bias_walk = imu.accel_bias_walk;
  gc.reproj_sigma_px = 1.0;
  return gc;
}

NavState truth_state(const TrajectorySpec& spec, double t, const ImuBias& bias) {
  const TrajectorySample s = sample_trajectory(spec, t);
  NavState out;
  out.pose = s.pose;
  out.velocity = s.velocity;
  out.gyro_bias = bias.gyro;
  out.accel_bias = bias.accel;
  out.stamp = t;
  return out;
}

std::vector<ImuRecord> slice(std::span<const ImuRecord> records, double t0, double t1) {
  std::vector<ImuRecord> out;
  for (const ImuRecord& r : records) {
    if (r.t >= t0 - 1e-9 && r.t <= t1 + 1e-9) out.push_back(r);
  }
  return out;
}

// Drives n_keyframes through a graph from simulated streams.
std::vector<KeyframeSummary> drive(
    SlidingWindowGraph& graph, const TrajectorySpec& spec, const ImuConfig& imu,
    std::span<const Landmark> landmarks, int n_keyframes, double interval, std::uint64_t seed,
    const std::function<std::optional<PoseSampleSet>(int, const Posed&)>& oracle = {}) {
  const auto records = synthesize_imu(spec, imu, seed);
  std::mt19937_64 obs_rng(seed + 17);
  const CameraModel cam = drive_camera(0.0);
  std::vector<KeyframeSummary> summaries;
  for (int k = 0; k < n_keyframes; ++k) {
    const double t = k * interval;
    const TrajectorySample s = sample_trajectory(spec, t);
    const auto obs = observe_landmarks(s.pose, cam, landmarks, obs_rng);
    std::optional<PoseSampleSet> set;
    if (oracle) set = oracle(k, s.pose);
    if (k == 0) {
      const NavState init = truth_state(spec, 0.0, imu.initial_bias);
      summaries.push_back(graph.add_keyframe(t, {}, obs, set, &init));
    } else {
      const auto segment = slice(records, (k - 1) * interval, t);
      summaries.push_back(graph.add_keyframe(t, segment, obs, set));
    }
    CHECK(summaries.back().solve.final_cost <= summaries.back().solve.initial_cost + 1e-12);
  }
  return summaries;
}

PoseSampleSet point_mass_set(const Posed& pose, const Vec3d& var, int count = 2) {
  PoseSampleSet set;
  set.kappa_inv = 1.0;
  for (int i = 0; i < count; ++i) {
    set.samples.push_back(PoseSample{pose.position, pose.rotation, var});
  }
  return set;
}

}  // namespace

TEST_SUITE("backend") {

TEST_CASE("reprojection residual zero at exact geometry and analytic offset") {
  const CameraModel cam = drive_camera();
  NavState state;
  state.pose.position = Vec3d(0, 0, 1);
  const Vec3d lm(2.1, 0.3, 1.2);
  const auto px = project_point(state.pose, cam, lm);
  REQUIRE(px.has_value());
  const auto r = reprojection_residual(*px, state, lm, cam);
  REQUIRE(r.has_value());
  CHECK(r->norm() < 1e-12);

  // lateral shift delta at depth z moves the pixel by ~ fx * delta / z
  const double depth = 2.0;
  const Vec3d on_axis = state.pose.position + Vec3d(depth + 0.1, 0, 0);
  const auto px_axis = project_point(state.pose, cam, on_axis);
  REQUIRE(px_axis.has_value());
  const auto r_shift =
      reprojection_residual(*px_axis, state, on_axis + Vec3d(0, 0.01, 0), cam);
  REQUIRE(r_shift.has_value());
  CHECK(std::abs(r_shift->norm() - cam.fx * 0.01 / depth) < 0.02);
}

TEST_CASE("reprojection cheirality returns empty, not a throw") {
  const CameraModel cam = drive_camera();
  NavState state;
  CHECK(!reprojection_residual(Eigen::Vector2d(240, 240), state, Vec3d(-3, 0, 0), cam)
             .has_value());
  CHECK(!reprojection_jacobians(Eigen::Vector2d(240, 240), state, Vec3d(-3, 0, 0), cam)
             .has_value());
}

TEST_CASE("reprojection jacobians match finite differences") {
  const CameraModel cam = drive_camera();
  std::mt19937_64 rng(91);
  for (int trial = 0; trial < 30; ++trial) {
    NavState state;
    state.pose.rotation = testing::random_rotation(rng, 0.5);
    state.pose.position = testing::random_vec3(rng, 1.0);
    const Vec3d lm = state.pose.transform(Vec3d(4.0, 0, 0)) + testing::random_vec3(rng, 0.8);
    const auto base = reprojection_jacobians(Eigen::Vector2d(200, 250), state, lm, cam);
    if (!base) continue;

    const auto residual_fn = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      NavState s = state;
      s.pose.rotation = exp_so3(Vec3d(d.segment<3>(0))) * s.pose.rotation;
      s.pose.position += d.segment<3>(3);
      const Vec3d l = lm + d.segment<3>(6);
      const auto r = reprojection_residual(Eigen::Vector2d(200, 250), s, l, cam);
      return r ? Eigen::VectorXd(*r) : Eigen::VectorXd(Eigen::Vector2d::Zero());
    };
    const Eigen::MatrixXd fd = testing::numeric_jacobian(residual_fn, 9);
    Eigen::MatrixXd analytic(2, 9);
    analytic << base->d_rotation, base->d_position, base->d_landmark;
    CHECK((analytic - fd).norm() / fd.norm() < 1e-5);
  }
}

TEST_CASE("absolute pose residual matches the scalar chordal form") {
  std::mt19937_64 rng(97);
  for (int trial = 0; trial < 100; ++trial) {
    UncertainPose meas;
    meas.mean_position = testing::random_vec3(rng, 2.0);
    meas.mean_rotation = testing::random_rotation(rng);
    const Mat3d a = Mat3d::Random();
    meas.pos_cov = a * a.transpose() + 0.05 * Mat3d::Identity();
    meas.rot_var = 0.3 + 0.5 * std::abs(testing::random_vec3(rng).x());

    NavState state;
    state.pose.position = meas.mean_position + testing::random_vec3(rng, 0.5);
    state.pose.rotation = exp_so3(testing::random_vec3(rng, 0.4)) * meas.mean_rotation;

    const auto r = absolute_pose_residual(meas, state);
    const double cost_vec = r.head<3>().dot(meas.pos_cov.inverse() * r.head<3>()) +
                            r.tail<3>().squaredNorm() / meas.rot_var;

    const double eps =
        log_so3((meas.mean_rotation.transpose() * state.pose.rotation).eval()).norm();
    const Vec3d dp = state.pose.position - meas.mean_position;
    const double cost_scalar =
        dp.dot(meas.pos_cov.inverse() * dp) + 2.0 * eps * eps / meas.rot_var;
    CHECK(std::abs(cost_vec - cost_scalar) < 1e-12 * std::max(1.0, cost_scalar));
  }
}

TEST_CASE("absolute pose residual analytic values and jacobians") {
  UncertainPose meas;
  meas.pos_cov = Mat3d::Identity();
  meas.rot_var = 1.0;
  NavState state;
  CHECK(absolute_pose_residual(meas, state).norm() < 1e-15);

  state.pose.rotation = exp_so3(Vec3d(0, 0.1, 0));
  const auto r = absolute_pose_residual(meas, state);
  CHECK(r.tail<3>().squaredNorm() == doctest::Approx(0.02).epsilon(1e-10));

  const AbsolutePoseJacobians aj = absolute_pose_jacobians(meas, state);
  const Eigen::MatrixXd fd = testing::numeric_jacobian(
      [&](const Eigen::VectorXd& d) {
        NavState s = state;
        s.pose.rotation = exp_so3(Vec3d(d.segment<3>(0))) * s.pose.rotation;
        s.pose.position += d.segment<3>(3);
        return Eigen::VectorXd(absolute_pose_residual(meas, s));
      },
      6);
  Eigen::MatrixXd analytic(6, 6);
  analytic << aj.d_rotation, aj.d_position;
  CHECK((analytic - fd).norm() < 1e-6);
}

TEST_CASE("gate thresholds per the published values") {
  const Posed estimate;

  UncertainPose meas;
  meas.pos_cov = 0.5 * Mat3d::Identity();  // trace 1.5
  CHECK(gate(meas, estimate, 1.0, 0.4).status == GateStatus::kRejectedTrace);

  meas.pos_cov = 0.04 * Mat3d::Identity();
  meas.mean_position = Vec3d(0.1, 0, 0);
  const GateResult maha = gate(meas, estimate, 1.0, 0.4);
  CHECK(maha.status == GateStatus::kRejectedMahalanobis);
  CHECK(maha.mahalanobis == doctest::Approx(0.5));

  meas.mean_position = Vec3d::Zero();
  meas.pos_cov = 1e-4 * Mat3d::Identity();
  CHECK(gate(meas, estimate, 1.0, 0.4).accepted());
}

TEST_CASE("gate in constant mode skips the trace branch") {
  const Posed estimate;
  UncertainPose meas;
  meas.pos_cov = 0.5 * Mat3d::Identity();  // trace 1.5 > tau1
  CHECK(gate(meas, estimate, 1.0, 0.4, CovarianceMode::kConstant).accepted());
  CHECK(gate(meas, estimate, 1.0, 0.4, CovarianceMode::kEstimated).status ==
        GateStatus::kRejectedTrace);
}

TEST_CASE("gate treats singular covariance as trace rejection") {
  const Posed estimate;
  UncertainPose meas;
  meas.pos_cov = Mat3d::Zero();
  CHECK(gate(meas, estimate, 1.0, 0.4).status == GateStatus::kRejectedTrace);
}

TEST_CASE("gate trace test is monotone under covariance inflation") {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> scale(1.0, 8.0);
  const Posed estimate;
  for (int trial = 0; trial < 300; ++trial) {
    UncertainPose meas;
    const Mat3d a = Mat3d::Random();
    meas.pos_cov = a * a.transpose() + 0.05 * Mat3d::Identity();
    meas.mean_position = testing::random_vec3(rng, 0.3);
    const GateResult before = gate(meas, estimate, 1.0, 1e9);
    meas.pos_cov *= scale(rng);
    const GateResult after = gate(meas, estimate, 1.0, 1e9);
    if (before.status == GateStatus::kRejectedTrace) {
      CHECK(after.status == GateStatus::kRejectedTrace);
    }
  }
}

TEST_CASE("first keyframe solves to the prior mean") {
  ImuConfig imu;
  SlidingWindowGraph graph(drive_camera(), drive_config(imu));
  NavState init;
  init.pose.position = Vec3d(1, 2, 3);
  init.pose.rotation = exp_so3(Vec3d(0.1, -0.2, 0.3));
  init.velocity = Vec3d(0.5, 0, -0.1);

  const KeyframeSummary s = graph.add_keyframe(0.0, {}, {}, std::nullopt, &init);
  CHECK(s.solve.final_cost < 1e-12);
  CHECK(graph.states().size() == 1);
  CHECK(graph.num_absolute_pose_factors() == 0);
  CHECK((graph.latest_state().pose.position - init.pose.position).norm() < 1e-9);
  CHECK((graph.latest_state().pose.rotation - init.pose.rotation).norm() < 1e-9);
}

TEST_CASE("single pose with absolute factor converges to the measurement mean") {
  ImuConfig imu;
  GraphConfig gc = drive_config(imu);
  gc.rejection_enabled = false;
  SlidingWindowGraph graph(drive_camera(), gc);

  std::mt19937_64 rng(103);
  const Posed target{testing::random_rotation(rng, 1.0), testing::random_vec3(rng, 2.0)};
  NavState init;  // start away from the target
  init.pose.position = target.position + Vec3d(0.5, -0.3, 0.2);
  init.pose.rotation = exp_so3(Vec3d(0.2, 0.1, -0.3)) * target.rotation;

  graph.add_keyframe(0.0, {}, {}, point_mass_set(target, Vec3d(0.01, 0.01, 0.01)), &init);
  graph.remove_priors();
  const SolveStats stats = graph.optimize();
  CHECK(stats.final_cost < 1e-16);
  CHECK((graph.latest_state().pose.position - target.position).norm() < 1e-6);
  CHECK(chordal_distance(graph.latest_state().pose.rotation, target.rotation) < 1e-6);
}

TEST_CASE("rejected oracle measurement attaches no factor") {
  ImuConfig imu;
  GraphConfig gc = drive_config(imu);
  gc.rejection_enabled = true;
  SlidingWindowGraph graph(drive_camera(), gc);
  NavState init;

  PoseSampleSet bad = point_mass_set(Posed{}, Vec3d(5.0, 5.0, 5.0));  // trace above tau1
  const KeyframeSummary s = graph.add_keyframe(0.0, {}, {}, bad, &init);
  CHECK(s.had_oracle);
  REQUIRE(s.gate.has_value());
  CHECK(s.gate->status == GateStatus::kRejectedTrace);
  CHECK(!s.abs_factor_added);
  CHECK(graph.num_absolute_pose_factors() == 0);
}

TEST_CASE("alternate keyframes carry absolute pose factors") {
  const TrajectorySpec spec = drive_spec();
  ImuConfig imu;
  imu.gyro_noise_density = 1e-4;
  imu.accel_noise_density = 1e-3;
  GraphConfig gc = drive_config(imu);
  gc.rejection_enabled = true;
  SlidingWindowGraph graph(drive_camera(), gc);
  const auto landmarks =
      generate_landmarks(Eigen::AlignedBox3d(Vec3d(-9, -9, 0), Vec3d(9, 9, 4)), 200, 3);

  const auto summaries =
      drive(graph, spec, imu, landmarks, 6, 0.5, 29,
            [&](int k, const Posed& truth) -> std::optional<PoseSampleSet> {
              if (k % 2 != 0) return std::nullopt;
              return point_mass_set(truth, Vec3d(0.01, 0.01, 0.01), 4);
            });

  for (int k = 0; k < 6; ++k) {
    CHECK(summaries[k].had_oracle == (k % 2 == 0));
    CHECK(summaries[k].abs_factor_added == (k % 2 == 0));
  }
  CHECK(graph.num_absolute_pose_factors() == 3);
}

TEST_CASE("optimize leaves a noiseless graph at ground truth untouched") {
  const TrajectorySpec spec = drive_spec();
  ImuConfig imu;  // zero noise
  SlidingWindowGraph graph(drive_camera(), drive_config(imu));
  const auto landmarks =
      generate_landmarks(Eigen::AlignedBox3d(Vec3d(-9, -9, 0), Vec3d(9, 9, 4)), 150, 5);
  drive(graph, spec, imu, landmarks, 4, 0.5, 31);

  const SolveStats stats = graph.optimize();
  CHECK(stats.iterations <= 1);
  CHECK(stats.final_cost < 1e-6);
}

TEST_CASE("sliding-window LM matches a dense finite-difference Gauss-Newton solve") {
  const TrajectorySpec spec = drive_spec();
  ImuConfig imu;
  imu.initial_bias.gyro = Vec3d(0.002, -0.001, 0.0015);
  imu.initial_bias.accel = Vec3d(0.02, -0.01, 0.03);
  imu.gyro_noise_density = 1e-4;
  imu.accel_noise_density = 1e-3;

  GraphConfig gc = drive_config(imu);
  gc.solver.max_iterations = 200;
  gc.solver.cost_decrease_tol = 1e-16;
  gc.solver.gradient_tol = 1e-14;
  SlidingWindowGraph graph(drive_camera(), gc);

  // A dozen landmarks ahead of the first poses keeps the dense reference cheap.
  std::vector<Landmark> landmarks;
  std::mt19937_64 rng(37);
  const TrajectorySample s0 = sample_trajectory(spec, 0.0);
  for (int i = 0; i < 12; ++i) {
    const Vec3d body_pt(4.0 + (2 * i) % 5, -2.0 + 0.4 * i, 0.3 * i - 1.0);
    landmarks.push_back(Landmark{i, s0.pose.transform(body_pt)});
  }
  // Noiseless drive: the measurements are exactly consistent, so both
  // solvers must land on the same zero-residual optimum.
  ImuConfig clean = imu;
  clean.gyro_noise_density = 0;
  clean.accel_noise_density = 0;
  drive(graph, spec, clean, landmarks, 3, 0.5, 41);
  REQUIRE(graph.states().size() == 3);
  REQUIRE(graph.landmark_positions().size() >= 6);

  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd delta(graph.problem_dimension());
  for (int i = 0; i < delta.size(); ++i) delta[i] = 5e-3 * gauss(rng);
  graph.apply_increment(delta);

  SlidingWindowGraph reference = graph;
  const SolveStats stats = graph.optimize();
  CHECK(stats.final_cost <= stats.initial_cost);
  testing::dense_gauss_newton(reference, 60);

  CHECK(testing::state_space_distance(graph, reference) < 1e-8);
}

TEST_CASE("gauge freedom: translating the prior translates the whole estimate") {
  const TrajectorySpec spec = drive_spec();
  ImuConfig imu;
  imu.gyro_noise_density = 2e-4;
  imu.accel_noise_density = 2e-3;
  const auto landmarks =
      generate_landmarks(Eigen::AlignedBox3d(Vec3d(-9, -9, 0), Vec3d(9, 9, 4)), 200, 7);
  const Vec3d shift(2.0, -1.0, 0.5);

  GraphConfig gc = drive_config(imu);
  SlidingWindowGraph base(drive_camera(), gc);
  SlidingWindowGraph moved(drive_camera(), gc);

  const auto records = synthesize_imu(spec, imu, 43);
  std::mt19937_64 obs_rng_a(60), obs_rng_b(60);
  for (int k = 0; k < 6; ++k) {
    const double t = k * 0.5;
    const TrajectorySample s = sample_trajectory(spec, t);
    const auto obs_a = observe_landmarks(s.pose, drive_camera(), landmarks, obs_rng_a);
    const auto obs_b = observe_landmarks(s.pose, drive_camera(), landmarks, obs_rng_b);
    if (k == 0) {
      NavState init = truth_state(spec, 0.0, imu.initial_bias);
      base.add_keyframe(t, {}, obs_a, std::nullopt, &init);
      NavState init_shifted = init;
      init_shifted.pose.position += shift;
      moved.add_keyframe(t, {}, obs_b, std::nullopt, &init_shifted);
    } else {
      const auto segment = slice(records, (k - 1) * 0.5, t);
      base.add_keyframe(t, segment, obs_a);
      moved.add_keyframe(t, segment, obs_b);
    }
  }
  for (std::size_t i = 0; i < base.states().size(); ++i) {
    const Vec3d diff = moved.states()[i].pose.position - base.states()[i].pose.position;
    CHECK((diff - shift).norm() < 1e-6);
    CHECK(chordal_distance(moved.states()[i].pose.rotation, base.states()[i].pose.rotation) <
          1e-6);
  }

  // absolute-pose factors break the symmetry
  GraphConfig gc_abs = gc;
  gc_abs.rejection_enabled = false;
  SlidingWindowGraph anchored(drive_camera(), gc_abs);
  SlidingWindowGraph anchored_moved(drive_camera(), gc_abs);
  std::mt19937_64 obs_rng_c(60), obs_rng_d(60);
  for (int k = 0; k < 4; ++k) {
    const double t = k * 0.5;
    const TrajectorySample s = sample_trajectory(spec, t);
    const auto obs_c = observe_landmarks(s.pose, drive_camera(), landmarks, obs_rng_c);
    const auto obs_d = observe_landmarks(s.pose, drive_camera(), landmarks, obs_rng_d);
    const auto set = k % 2 == 0 ? std::optional<PoseSampleSet>(point_mass_set(
                                      s.pose, Vec3d(0.01, 0.01, 0.01), 4))
                                : std::nullopt;
    if (k == 0) {
      NavState init = truth_state(spec, 0.0, imu.initial_bias);
      anchored.add_keyframe(t, {}, obs_c, set, &init);
      NavState init_shifted = init;
      init_shifted.pose.position += shift;
      anchored_moved.add_keyframe(t, {}, obs_d, set, &init_shifted);
    } else {
      const auto segment = slice(records, (k - 1) * 0.5, t);
      anchored.add_keyframe(t, segment, obs_c, set);
      anchored_moved.add_keyframe(t, segment, obs_d, set);
    }
  }
  const Vec3d anchored_diff =
      anchored_moved.latest_state().pose.position - anchored.latest_state().pose.position;
  CHECK((anchored_diff - shift).norm() > 0.1);
}

TEST_CASE("supplied-but-rejected oracle reduces bit-exactly to the VIO-only path") {
  const TrajectorySpec spec = drive_spec();
  ImuConfig imu;
  imu.gyro_noise_density = 2e-4;
  imu.accel_noise_density = 2e-3;
  const auto landmarks =
      generate_landmarks(Eigen::AlignedBox3d(Vec3d(-9, -9, 0), Vec3d(9, 9, 4)), 200, 9);

  GraphConfig gc = drive_config(imu);
  gc.tau1 = -1.0;  // estimated-mode trace gate rejects everything
  SlidingWindowGraph vio_only(drive_camera(), gc);
  SlidingWindowGraph gated(drive_camera(), gc);

  const auto records = synthesize_imu(spec, imu, 47);
  std::mt19937_64 obs_rng_a(71), obs_rng_b(71);
  for (int k = 0; k < 6; ++k) {
    const double t = k * 0.5;
    const TrajectorySample s = sample_trajectory(spec, t);
    const auto obs_a = observe_landmarks(s.pose, drive_camera(), landmarks, obs_rng_a);
    const auto obs_b = observe_landmarks(s.pose, drive_camera(), landmarks, obs_rng_b);
    const auto set =
        std::optional<PoseSampleSet>(point_mass_set(s.pose, Vec3d(0.01, 0.01, 0.01), 4));
    if (k == 0) {
      NavState init = truth_state(spec, 0.0, imu.initial_bias);
      vio_only.add_keyframe(t, {}, obs_a, std::nullopt, &init);
      gated.add_keyframe(t, {}, obs_b, set, &init);
    } else {
      const auto segment = slice(records, (k - 1) * 0.5, t);
      vio_only.add_keyframe(t, segment, obs_a);
      gated.add_keyframe(t, segment, obs_b, set);
    }
  }
  CHECK(gated.num_absolute_pose_factors() == 0);
  for (std::size_t i = 0; i < vio_only.states().size(); ++i) {
    CHECK(vio_only.states()[i].pose.position == gated.states()[i].pose.position);
    CHECK(vio_only.states()[i].pose.rotation == gated.states()[i].pose.rotation);
    CHECK(vio_only.states()[i].velocity == gated.states()[i].velocity);
  }
}

TEST_CASE("windowed estimate stays close to the batch solution") {
  const TrajectorySpec spec = drive_spec();
  ImuConfig imu;
  imu.gyro_noise_density = 2e-4;
  imu.accel_noise_density = 2e-3;
  const auto landmarks =
      generate_landmarks(Eigen::AlignedBox3d(Vec3d(-9, -9, 0), Vec3d(9, 9, 4)), 250, 11);

  GraphConfig windowed_cfg = drive_config(imu);
  windowed_cfg.window_size = 6;
  GraphConfig batch_cfg = drive_config(imu);
  batch_cfg.window_size = 0;  // never drop

  SlidingWindowGraph windowed(drive_camera(), windowed_cfg);
  SlidingWindowGraph batch(drive_camera(), batch_cfg);

  const auto records = synthesize_imu(spec, imu, 53);
  std::mt19937_64 obs_rng_a(81), obs_rng_b(81);
  for (int k = 0; k < 14; ++k) {
    const double t = k * 0.5;
    const TrajectorySample s = sample_trajectory(spec, t);
    const auto obs_a = observe_landmarks(s.pose, drive_camera(), landmarks, obs_rng_a);
    const auto obs_b = observe_landmarks(s.pose, drive_camera(), landmarks, obs_rng_b);
    if (k == 0) {
      NavState init = truth_state(spec, 0.0, imu.initial_bias);
      windowed.add_keyframe(t, {}, obs_a, std::nullopt, &init);
      batch.add_keyframe(t, {}, obs_b, std::nullopt, &init);
    } else {
      const auto segment = slice(records, (k - 1) * 0.5, t);
      windowed.add_keyframe(t, segment, obs_a);
      batch.add_keyframe(t, segment, obs_b);
    }
  }
  CHECK(windowed.states().size() == 6);
  CHECK(batch.states().size() == 14);
  const Vec3d diff =
      windowed.latest_state().pose.position - batch.latest_state().pose.position;
  CHECK(diff.norm() < 0.05);
}

TEST_CASE("whitened cost at ground truth is chi-square consistent") {
  const TrajectorySpec spec = drive_spec();
  ImuConfig imu;
  imu.gyro_noise_density = 2e-4;
  imu.accel_noise_density = 2e-3;
  const double pixel_sigma = 0.8;

  const auto landmarks =
      generate_landmarks(Eigen::AlignedBox3d(Vec3d(-9, -9, 0), Vec3d(9, 9, 4)), 120, 13);

  double ratio_sum = 0;
  int trials_done = 0;
  for (int trial = 0; trial < 200; ++trial) {
    CameraModel cam = drive_camera(pixel_sigma);
    GraphConfig gc = drive_config(imu);
    gc.reproj_sigma_px = pixel_sigma;
    gc.solver.max_iterations = 0;  // evaluate only
    SlidingWindowGraph graph(cam, gc);

    const auto records = synthesize_imu(spec, imu, 1000 + trial);
    std::mt19937_64 obs_rng(2000 + trial);
    std::vector<NavState> truth;
    for (int k = 0; k < 3; ++k) {
      const double t = k * 0.5;
      const TrajectorySample s = sample_trajectory(spec, t);
      truth.push_back(truth_state(spec, t, imu.initial_bias));
      const auto obs = observe_landmarks(s.pose, cam, landmarks, obs_rng);
      if (k == 0) {
        graph.add_keyframe(t, {}, obs, std::nullopt, &truth.back());
      } else {
        graph.add_keyframe(t, slice(records, (k - 1) * 0.5, t), obs);
      }
    }

    // move states and landmarks onto the ground truth
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(graph.problem_dimension());
    for (int k = 0; k < 3; ++k) {
      const NavState& est = graph.states()[k];
      delta.segment<3>(15 * k) =
          log_so3((truth[k].pose.rotation * est.pose.rotation.transpose()).eval());
      delta.segment<3>(15 * k + 3) = truth[k].pose.position - est.pose.position;
      delta.segment<3>(15 * k + 6) = truth[k].velocity - est.velocity;
      delta.segment<3>(15 * k + 9) = truth[k].gyro_bias - est.gyro_bias;
      delta.segment<3>(15 * k + 12) = truth[k].accel_bias - est.accel_bias;
    }
    const auto ids = graph.solvable_landmark_ids();
    const auto positions = graph.landmark_positions();
    for (std::size_t r = 0; r < ids.size(); ++r) {
      delta.segment<3>(45 + 3 * r) = landmarks[ids[r]].position - positions.at(ids[r]);
    }
    graph.apply_increment(delta);

    const Eigen::VectorXd res = graph.whitened_residuals();
    const int imu_rows = 9 * graph.num_imu_factors();
    const int reproj_rows = 2 * graph.num_reprojection_factors();
    // chi-square statistic over the noise-driven rows: imu + reprojection
    const double chi2 =
        res.segment(15, imu_rows).squaredNorm() + res.tail(reproj_rows).squaredNorm();
    ratio_sum += chi2 / (imu_rows + reproj_rows);
    ++trials_done;
  }
  const double mean_ratio = ratio_sum / trials_done;
  CHECK(mean_ratio > 0.7);
  CHECK(mean_ratio < 1.3);
}

TEST_CASE("keyframe stamps must increase") {
  ImuConfig imu;
  SlidingWindowGraph graph(drive_camera(), drive_config(imu));
  NavState init;
  graph.add_keyframe(0.0, {}, {}, std::nullopt, &init);
  std::vector<ImuRecord> segment = {ImuRecord{0.0}, ImuRecord{0.1}};
  CHECK_THROWS_AS((void)graph.add_keyframe(-0.5, segment, {}), NonMonotonicTime);
}

}  // TEST_SUITE

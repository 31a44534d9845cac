#include <doctest.h>

#include <numeric>

#include "apvio/camera.hpp"
#include "apvio/imu_synth.hpp"
#include "apvio/oracle.hpp"
#include "apvio/trajectory.hpp"
#include "helpers.hpp"

using namespace apvio;

namespace {

TrajectorySpec lemniscate_spec() {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kLemniscate;
  spec.amplitudes = Vec3d(5.0, 0.0, 0.4);
  spec.angular_freqs = Vec3d(0.25, 0.0, 0.6);
  spec.phases = Vec3d(0.0, 0.4, 1.1);
  spec.center = Vec3d(1.0, -2.0, 1.5);
  spec.duration = 60.0;
  spec.yaw_mode = YawMode::kTangent;
  return spec;
}

TrajectorySpec lissajous_spec() {
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

CameraModel test_camera() {
  CameraModel cam;
  cam.fx = cam.fy = 240;
  cam.cx = cam.cy = 240;
  cam.width = cam.height = 480;
  // camera z = body x, camera x = -body y, camera y = -body z
  cam.body_to_camera.rotation << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  cam.body_to_camera.position = Vec3d(0, 0, -0.1);
  cam.pixel_noise_std = 0;
  return cam;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("lemniscate analytic point at theta = 0") {
  const TrajectorySpec spec = lemniscate_spec();
  const TrajectorySample s = sample_trajectory(spec, 0.0);
  // x = a cos0/(1+0) = a, y = 0, z = center + A_z sin(phase_z)
  CHECK(s.pose.position.x() == doctest::Approx(spec.center.x() + 5.0));
  CHECK(s.pose.position.y() == doctest::Approx(spec.center.y()));
  CHECK(s.pose.position.z() ==
        doctest::Approx(spec.center.z() + 0.4 * std::sin(spec.phases.z())));
}

TEST_CASE("lissajous analytic point with quarter phase") {
  const TrajectorySpec spec = lissajous_spec();
  const TrajectorySample s = sample_trajectory(spec, 0.0);
  CHECK(s.pose.position.x() == doctest::Approx(spec.center.x() + 6.0));
  CHECK(s.pose.position.y() == doctest::Approx(spec.center.y()));
}

TEST_CASE("trajectory rejects out-of-range times") {
  CHECK_THROWS_AS((void)sample_trajectory(lemniscate_spec(), -0.5), OutOfRange);
  CHECK_THROWS_AS((void)sample_trajectory(lemniscate_spec(), 61.0), OutOfRange);
}

TEST_CASE("velocity and acceleration match finite differences") {
  const double h = 1e-5;
  for (const TrajectorySpec& spec : {lemniscate_spec(), lissajous_spec()}) {
    for (double t : {0.7, 5.3, 17.9, 42.0}) {
      const TrajectorySample s = sample_trajectory(spec, t);
      const TrajectorySample sp = sample_trajectory(spec, t + h);
      const TrajectorySample sm = sample_trajectory(spec, t - h);

      const Vec3d vel_fd = (sp.pose.position - sm.pose.position) / (2 * h);
      CHECK((s.velocity - vel_fd).norm() < 1e-6);

      const Vec3d acc_fd = (sp.velocity - sm.velocity) / (2 * h);
      const Vec3d acc_world = s.pose.rotation * s.accel_body;
      CHECK((acc_world - acc_fd).norm() < 1e-6);

      // body rate: R(t)^T R(t+h) ~ Exp(omega h)
      const Vec3d omega_fd =
          log_so3((sm.pose.rotation.transpose() * sp.pose.rotation).eval()) / (2 * h);
      CHECK((s.angular_velocity_body - omega_fd).norm() < 1e-6);
    }
  }
}

TEST_CASE("attitude stays below the 30 degree bound") {
  const TrajectorySpec spec = lissajous_spec();
  for (double t = 0; t <= spec.duration; t += 0.25) {
    const TrajectorySample s = sample_trajectory(spec, t);
    // angle between body z and world z
    const double tilt = std::acos(std::clamp(s.pose.rotation(2, 2), -1.0, 1.0));
    CHECK(tilt < 30.0 * M_PI / 180.0);
  }
}

TEST_CASE("hover imu: zero gyro, accel equals reaction to gravity") {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kLissajous;
  spec.amplitudes = Vec3d::Zero();
  spec.angular_freqs = Vec3d(0.2, 0.3, 0.4);
  spec.center = Vec3d(0, 0, 1);
  spec.duration = 2.0;
  spec.yaw_mode = YawMode::kFixed;

  ImuConfig cfg;  // zero noise, zero bias
  const auto records = synthesize_imu(spec, cfg, 1);
  for (const ImuRecord& r : records) {
    CHECK(r.gyro.norm() < 1e-12);
    CHECK((r.accel - Vec3d(0, 0, 9.81)).norm() < 1e-12);
  }
}

TEST_CASE("circular trajectory centripetal magnitude") {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kLissajous;
  const double radius = 3.0, omega = 0.5;
  spec.amplitudes = Vec3d(radius, radius, 0.0);
  spec.angular_freqs = Vec3d(omega, omega, 0.0);
  spec.phases = Vec3d(M_PI / 2, 0, 0);
  spec.duration = 30.0;
  spec.yaw_mode = YawMode::kFixed;

  ImuConfig cfg;
  cfg.gravity = Vec3d::Zero();  // isolate kinematic acceleration
  const auto records = synthesize_imu(spec, cfg, 1);
  for (const ImuRecord& r : records) {
    CHECK(std::abs(r.accel.norm() - omega * omega * radius) < 1e-9);
  }
}

TEST_CASE("gyro white noise variance matches the configured density") {
  TrajectorySpec spec;
  spec.kind = TrajectoryKind::kLissajous;
  spec.amplitudes = Vec3d::Zero();
  spec.duration = 60.0;
  spec.yaw_mode = YawMode::kFixed;

  ImuConfig cfg;
  cfg.rate = 240;
  cfg.gyro_noise_density = 3e-3;
  const auto records = synthesize_imu(spec, cfg, 99);

  double sq = 0;
  int n = 0;
  for (const ImuRecord& r : records) {
    for (int k = 0; k < 3; ++k) {
      sq += r.gyro[k] * r.gyro[k];
      ++n;
    }
  }
  const double expected = cfg.gyro_noise_density * cfg.gyro_noise_density * cfg.rate;
  CHECK(std::abs(sq / n - expected) / expected < 0.10);
}

TEST_CASE("noiseless imu integrates back to the analytic trajectory") {
  // Direct trapezoidal integration at 10x rate stays within 1e-4 m over 10 s.
  TrajectorySpec spec = lissajous_spec();
  spec.duration = 10.0;
  ImuConfig cfg;
  cfg.rate = 2400;
  const auto records = synthesize_imu(spec, cfg, 1);

  const TrajectorySample s0 = sample_trajectory(spec, 0.0);
  Mat3d r = s0.pose.rotation;
  Vec3d v = s0.velocity;
  Vec3d p = s0.pose.position;
  for (std::size_t k = 0; k + 1 < records.size(); ++k) {
    const double dt = records[k + 1].t - records[k].t;
    const Vec3d omega = 0.5 * (records[k].gyro + records[k + 1].gyro);
    const Vec3d accel = 0.5 * (records[k].accel + records[k + 1].accel);
    const Vec3d a_world = r * exp_so3((omega * (0.5 * dt)).eval()) * accel + cfg.gravity;
    p += v * dt + 0.5 * a_world * dt * dt;
    v += a_world * dt;
    r = r * exp_so3((omega * dt).eval());
  }
  const TrajectorySample s1 = sample_trajectory(spec, spec.duration);
  CHECK((p - s1.pose.position).norm() < 1e-4);
  CHECK(log_so3((r.transpose() * s1.pose.rotation).eval()).norm() < 1e-4);
}

TEST_CASE("landmark generation determinism and errors") {
  const Eigen::AlignedBox3d box(Vec3d(-2, -3, 0), Vec3d(4, 5, 2));
  CHECK_THROWS_AS((void)generate_landmarks(box, 0, 1), std::invalid_argument);

  const auto a = generate_landmarks(box, 100, 7);
  const auto b = generate_landmarks(box, 100, 7);
  REQUIRE(a.size() == 100);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].id == b[i].id);
    CHECK((a[i].position - b[i].position).norm() == 0.0);
    CHECK(box.contains(a[i].position));
  }

  // degenerate box collapses to its corner point
  const Eigen::AlignedBox3d point(Vec3d(1, 1, 1), Vec3d(1, 1, 1));
  const auto single = generate_landmarks(point, 1, 3);
  CHECK((single[0].position - Vec3d(1, 1, 1)).norm() < 1e-15);
}

TEST_CASE("landmark empirical mean near box center") {
  const Eigen::AlignedBox3d box(Vec3d(-4, 0, 1), Vec3d(4, 10, 3));
  const auto landmarks = generate_landmarks(box, 100000, 11);
  Vec3d mean = Vec3d::Zero();
  for (const Landmark& lm : landmarks) mean += lm.position;
  mean /= static_cast<double>(landmarks.size());
  const Vec3d extent = box.max() - box.min();
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(mean[k] - box.center()[k]) < 0.01 * extent[k]);
  }
}

TEST_CASE("projection basics") {
  const CameraModel cam = test_camera();
  const Posed body;  // identity: camera looks along +x at (0,0,-0.1) offset

  // camera origin sits at body (0.1, 0, 0); optical axis is body +x
  const Vec3d on_axis = body.position + Vec3d(1.1, 0, 0);
  const auto px = project_point(body, cam, on_axis);
  REQUIRE(px.has_value());
  CHECK(px->x() == doctest::Approx(cam.cx));
  CHECK(px->y() == doctest::Approx(cam.cy));

  // behind the camera
  CHECK(!project_point(body, cam, Vec3d(-1.0, 0, 0)).has_value());
}

TEST_CASE("observe_landmarks respects bounds and determinism") {
  const CameraModel cam = test_camera();
  std::mt19937_64 rng(5);
  const auto landmarks = generate_landmarks(
      Eigen::AlignedBox3d(Vec3d(0.5, -6, -2), Vec3d(12, 6, 4)), 300, 13);
  std::mt19937_64 obs_rng_a(17), obs_rng_b(17);
  const Posed body{testing::random_rotation(rng, 0.2), Vec3d(0, 0, 1)};
  const auto obs_a = observe_landmarks(body, cam, landmarks, obs_rng_a);
  const auto obs_b = observe_landmarks(body, cam, landmarks, obs_rng_b);
  REQUIRE(obs_a.size() == obs_b.size());
  CHECK(obs_a.size() > 10);
  for (std::size_t i = 0; i < obs_a.size(); ++i) {
    CHECK(obs_a[i].landmark_id == obs_b[i].landmark_id);
    CHECK((obs_a[i].pixel - obs_b[i].pixel).norm() == 0.0);
  }
}

TEST_CASE("noiseless projections invert by triangulation") {
  const CameraModel cam = test_camera();
  std::mt19937_64 rng(23);
  const Posed pose_a{exp_so3(Vec3d(0, 0, 0.1)), Vec3d(0, 0, 1)};
  const Posed pose_b{exp_so3(Vec3d(0, 0, -0.15)), Vec3d(0.8, 0.5, 1.2)};
  for (int i = 0; i < 50; ++i) {
    const Vec3d lm = Vec3d(6.0, 0, 1.0) + testing::random_vec3(rng, 1.5);
    const auto px_a = project_point(pose_a, cam, lm);
    const auto px_b = project_point(pose_b, cam, lm);
    if (!px_a || !px_b) continue;
    const Vec3d recovered = triangulate_two_view(pose_a, *px_a, pose_b, *px_b, cam);
    CHECK((recovered - lm).norm() < 1e-9);
  }
}

TEST_CASE("oracle zero noise reproduces the true pose") {
  OracleConfig cfg;
  cfg.pos_noise_std = Vec3d::Zero();
  cfg.rot_noise_std = 0;
  cfg.aleatoric_mode = AleatoricMode::kFixed;
  cfg.aleatoric_reported_var = Vec3d(0.04, 0.04, 0.04);
  OracleSimulator sim(cfg);

  std::mt19937_64 rng(31);
  const Posed truth{testing::random_rotation(rng), testing::random_vec3(rng, 3.0)};
  const OracleMeasurement m = sim.measure(truth, 0.0);
  REQUIRE(static_cast<int>(m.set.samples.size()) == cfg.sample_count);
  CHECK(!m.injected_outlier);
  for (const PoseSample& s : m.set.samples) {
    CHECK((s.position - truth.position).norm() < 1e-15);
    CHECK((s.rotation - truth.rotation).norm() < 1e-15);
  }
}

TEST_CASE("ood zone inflates epistemic spread by the squared multiplier") {
  OracleConfig cfg;
  cfg.pos_noise_std = Vec3d(0.2, 0.2, 0.2);
  cfg.rot_noise_std = 0.03;
  cfg.rng_seed = 7;
  OodZone zone;
  zone.box = Eigen::AlignedBox3d(Vec3d(5, -5, -5), Vec3d(15, 5, 5));
  zone.bias = Vec3d(0.5, 0, 0);
  zone.spread_multiplier = 5.0;
  cfg.ood_zones.push_back(zone);
  OracleSimulator sim(cfg);

  const Posed outside{Mat3d::Identity(), Vec3d(0, 0, 0)};
  const Posed inside{Mat3d::Identity(), Vec3d(10, 0, 0)};
  double trace_out = 0, trace_in = 0;
  for (int i = 0; i < 100; ++i) {
    trace_out += aggregate(sim.measure(outside, 0).set).pos_cov_epistemic.trace();
    trace_in += aggregate(sim.measure(inside, 0).set).pos_cov_epistemic.trace();
  }
  const double ratio = trace_in / trace_out;
  CHECK(ratio > 25.0 * 0.7);
  CHECK(ratio < 25.0 * 1.3);
}

TEST_CASE("coherent outlier produces a huge mahalanobis distance") {
  OracleConfig cfg;
  cfg.pos_noise_std = Vec3d(0.05, 0.05, 0.05);
  cfg.aleatoric_mode = AleatoricMode::kFixed;
  cfg.aleatoric_reported_var = Vec3d(0.02, 0.02, 0.02);
  cfg.outlier_prob = 1.0;
  cfg.outlier_magnitude = 3.0;
  cfg.rng_seed = 3;
  OracleSimulator sim(cfg);

  const Posed truth;
  const OracleMeasurement m = sim.measure(truth, 0.0);
  REQUIRE(m.injected_outlier);
  const UncertainPose up = aggregate(m.set);
  const Vec3d diff = truth.position - up.mean_position;
  const double maha = std::sqrt(diff.dot(up.pos_cov.llt().solve(diff)));
  // reported variance stays nominal: ~3 m offset over ~0.2 m sigma
  CHECK(maha > 10.0);
  CHECK(maha < 25.0);
}

TEST_CASE("oracle determinism per seed") {
  OracleConfig cfg;
  cfg.rng_seed = 1234;
  cfg.outlier_prob = 0.3;
  cfg.outlier_magnitude = 2.0;
  OracleSimulator a(cfg), b(cfg);
  const Posed truth;
  for (int i = 0; i < 20; ++i) {
    const auto ma = a.measure(truth, i * 0.5);
    const auto mb = b.measure(truth, i * 0.5);
    CHECK(ma.injected_outlier == mb.injected_outlier);
    for (std::size_t s = 0; s < ma.set.samples.size(); ++s) {
      CHECK((ma.set.samples[s].position - mb.set.samples[s].position).norm() == 0.0);
    }
  }
}

}  // TEST_SUITE

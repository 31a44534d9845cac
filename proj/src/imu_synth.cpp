#include "apvio/imu_synth.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace apvio {

std::vector<ImuRecord> synthesize_imu(const TrajectorySpec& spec, const ImuConfig& cfg,
                                      std::uint64_t seed) {
  if (cfg.rate <= 0) throw std::invalid_argument("synthesize_imu: rate must be > 0");
  const double dt = 1.0 / cfg.rate;
  const int n = static_cast<int>(std::llround(spec.duration * cfg.rate));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma_gyro = cfg.gyro_noise_density * std::sqrt(cfg.rate);
  const double sigma_accel = cfg.accel_noise_density * std::sqrt(cfg.rate);
  const double walk_gyro = cfg.gyro_bias_walk * std::sqrt(dt);
  const double walk_accel = cfg.accel_bias_walk * std::sqrt(dt);

  Vec3d bias_g = cfg.initial_bias.gyro;
  Vec3d bias_a = cfg.initial_bias.accel;

  std::vector<ImuRecord> records;
  records.reserve(n + 1);
  for (int k = 0; k <= n; ++k) {
    const double t = static_cast<double>(k) * dt;
    const TrajectorySample s = sample_trajectory(spec, std::min(t, spec.duration));

    ImuRecord rec;
    rec.t = t;
    // specific force: R^T (a_world - g) = accel_body - R^T g
    const Vec3d specific_force = s.accel_body - s.pose.rotation.transpose() * cfg.gravity;
    for (int i = 0; i < 3; ++i) {
      rec.gyro[i] = s.angular_velocity_body[i] + bias_g[i] + sigma_gyro * gauss(rng);
      rec.accel[i] = specific_force[i] + bias_a[i] + sigma_accel * gauss(rng);
    }
    records.push_back(rec);

    for (int i = 0; i < 3; ++i) bias_g[i] += walk_gyro * gauss(rng);
    for (int i = 0; i < 3; ++i) bias_a[i] += walk_accel * gauss(rng);
  }
  return records;
}

}  // namespace apvio

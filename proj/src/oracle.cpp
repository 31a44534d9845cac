#include "apvio/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace apvio {

namespace {
constexpr double kVarFloor = 1e-10;  // keeps reported covariances invertible
}

OracleSimulator::OracleSimulator(const OracleConfig& cfg) : cfg_(cfg), rng_(cfg.rng_seed) {
  if (cfg_.sample_count < 2) throw std::invalid_argument("oracle: sample_count must be >= 2");
  if (cfg_.outlier_prob < 0 || cfg_.outlier_prob > 1) {
    throw std::invalid_argument("oracle: outlier_prob must be in [0, 1]");
  }
  if (cfg_.kappa <= 0) throw std::invalid_argument("oracle: kappa must be > 0");
  for (const OodZone& z : cfg_.ood_zones) {
    if (z.spread_multiplier < 1.0) {
      throw std::invalid_argument("oracle: spread_multiplier must be >= 1");
    }
  }
}

OracleMeasurement OracleSimulator::measure(const Posed& true_pose, double /*t*/) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vec3d zone_bias = Vec3d::Zero();
  double mult = 1.0;
  for (const OodZone& z : cfg_.ood_zones) {
    if (z.box.contains(true_pose.position)) {
      zone_bias = z.bias;
      mult = z.spread_multiplier;
      break;
    }
  }

  OracleMeasurement out;
  Vec3d set_offset = Vec3d::Zero();
  // Outlier direction is always drawn so the stream layout does not
  // depend on the probability draw.
  const bool set_outlier = unit(rng_) < cfg_.outlier_prob && !cfg_.outlier_per_sample;
  Vec3d dir(gauss(rng_), gauss(rng_), gauss(rng_));
  if (dir.norm() < 1e-12) dir = Vec3d::UnitX();
  if (set_outlier) {
    set_offset = cfg_.outlier_magnitude * dir.normalized();
    out.injected_outlier = true;
  }
  const bool bias_event = unit(rng_) < cfg_.bias_event_prob;
  Vec3d event_dir(gauss(rng_), gauss(rng_), gauss(rng_));
  if (bias_event && event_dir.norm() > 1e-12) {
    set_offset += cfg_.bias_event_magnitude * event_dir.normalized();
  }

  const Vec3d noise_std = mult * cfg_.pos_noise_std;
  const double rot_std = mult * cfg_.rot_noise_std;

  Vec3d reported;
  if (cfg_.aleatoric_mode == AleatoricMode::kHeteroscedastic) {
    reported = cfg_.heteroscedastic_scale * noise_std.cwiseProduct(noise_std);
  } else {
    reported = cfg_.aleatoric_reported_var;
  }
  reported = reported.cwiseMax(kVarFloor);

  out.set.kappa_inv = 1.0 / cfg_.kappa;
  out.set.samples.reserve(cfg_.sample_count);
  for (int i = 0; i < cfg_.sample_count; ++i) {
    PoseSample s;
    Vec3d pos_noise, rot_noise;
    for (int k = 0; k < 3; ++k) pos_noise[k] = noise_std[k] * gauss(rng_);
    for (int k = 0; k < 3; ++k) rot_noise[k] = rot_std * gauss(rng_);

    Vec3d sample_offset = set_offset;
    if (cfg_.outlier_per_sample) {
      const bool hit = unit(rng_) < cfg_.outlier_prob;
      Vec3d d(gauss(rng_), gauss(rng_), gauss(rng_));
      if (hit && d.norm() > 1e-12) {
        sample_offset = cfg_.outlier_magnitude * d.normalized();
        out.injected_outlier = true;
      }
    }

    s.position = true_pose.position + zone_bias + sample_offset + pos_noise;
    s.rotation = exp_so3(rot_noise) * true_pose.rotation;
    s.aleatoric_pos_var = reported;
    out.set.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace apvio

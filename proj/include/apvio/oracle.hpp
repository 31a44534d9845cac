#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Geometry>

#include "apvio/pose.hpp"
#include "apvio/uncertain_pose.hpp"

// Statistical stand-in for the absolute-pose regressor: emits pose
// sample sets around the true pose, with configurable spread, reported
// aleatoric variance, out-of-distribution zones (bias + inflated
// spread), and occasional gross outliers that keep nominal reported
// variances - the case the Mahalanobis gate exists for.

namespace apvio {

struct OodZone {
  Eigen::AlignedBox3d box;
  Vec3d bias = Vec3d::Zero();     // m, added to every sample inside the zone
  double spread_multiplier = 1.0; // >= 1, scales sample noise inside the zone
};

enum class AleatoricMode {
  kFixed,           // report aleatoric_reported_var regardless of the truth
  kHeteroscedastic  // report scale * (actual per-sample noise variance)
};

struct OracleConfig {
  int sample_count = 8;  // |W|
  Vec3d pos_noise_std = Vec3d(0.2, 0.2, 0.2);  // m, per-sample
  double rot_noise_std = 0.05;                 // rad, per-sample
  AleatoricMode aleatoric_mode = AleatoricMode::kHeteroscedastic;
  Vec3d aleatoric_reported_var = Vec3d(0.04, 0.04, 0.04);  // m^2, kFixed mode
  double heteroscedastic_scale = 1.0;
  std::vector<OodZone> ood_zones;
  double outlier_prob = 0.0;      // in [0, 1]
  double outlier_magnitude = 0.0; // m
  bool outlier_per_sample = false; // coherent whole-set shift by default
  // Correlated small bias events (not counted as outliers); models a
  // regressor whose weight samples drift together now and then.
  double bias_event_prob = 0.0;
  double bias_event_magnitude = 0.0;  // m
  double kappa = 1.0;             // rotational aleatoric precision
  std::uint64_t rng_seed = 0;
};

struct OracleMeasurement {
  PoseSampleSet set;
  bool injected_outlier = false;  // ground-truth label, never shown to the backend
};

/// Stateful generator; successive measure() calls advance one RNG stream
/// so a fixed seed reproduces the full sequence.
class OracleSimulator {
 public:
  explicit OracleSimulator(const OracleConfig& cfg);

  OracleMeasurement measure(const Posed& true_pose, double t);

  const OracleConfig& config() const { return cfg_; }

 private:
  OracleConfig cfg_;
  std::mt19937_64 rng_;
};

}  // namespace apvio

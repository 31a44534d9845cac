#include "apvio/runner.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <map>

#include <json.hpp>

#include "apvio/errors.hpp"
#include "apvio/imu_synth.hpp"
#include "apvio/records.hpp"
#include "apvio/sliding_window.hpp"

namespace apvio {

namespace {

constexpr std::uint64_t kImuStream = 0x1f3a6e8d02c4b971ull;
constexpr std::uint64_t kLandmarkStream = 0x4be1c8a97d5530f2ull;
constexpr std::uint64_t kObservationStream = 0x8c2d974fb1e06a53ull;
constexpr std::uint64_t kOracleStream = 0xd5f02b8a6c9e1734ull;

// Dropout-style weight sampling scatters more than an ensemble of
// independently trained nets and occasionally drifts coherently.
constexpr double kDropoutSpreadScale = 1.4;
constexpr double kDropoutBiasEventProb = 0.08;
constexpr double kDropoutBiasEventMagnitude = 0.45;

struct SensorData {
  std::vector<ImuRecord> imu;
  std::vector<GroundTruthRecord> ground_truth;           // at keyframe stamps
  std::vector<ObservationRecord> observations;           // flat, grouped by stamp
  std::vector<OracleRecordSet> oracle_sets;              // only at oracle keyframes
  std::vector<OracleLabel> oracle_labels;
  std::vector<Landmark> landmarks;
  std::vector<double> keyframe_stamps;
};

OracleConfig oracle_config_for_mode(const Scenario& sc, const RunConfig& cfg) {
  OracleConfig oc = sc.oracle;
  oc.kappa = cfg.kappa;
  if (cfg.outlier_prob_override) oc.outlier_prob = *cfg.outlier_prob_override;
  if (cfg.outlier_magnitude_override) oc.outlier_magnitude = *cfg.outlier_magnitude_override;
  if (cfg.oracle == OracleMode::kDropout) {
    oc.pos_noise_std *= kDropoutSpreadScale;
    oc.rot_noise_std *= kDropoutSpreadScale;
    oc.bias_event_prob = kDropoutBiasEventProb;
    oc.bias_event_magnitude = kDropoutBiasEventMagnitude;
  }
  return oc;
}

SensorData synthesize(const Scenario& sc, const RunConfig& cfg, std::uint64_t run_seed) {
  SensorData data;
  data.imu = synthesize_imu(sc.trajectory, sc.imu, mix_seed(run_seed, kImuStream));
  data.landmarks =
      generate_landmarks(sc.landmarks.region, sc.landmarks.count,
                         mix_seed(mix_seed(run_seed, kLandmarkStream), sc.landmarks.seed));

  const int n_kf =
      static_cast<int>(std::floor(sc.trajectory.duration / sc.keyframes.interval + 1e-9));
  std::mt19937_64 obs_rng(mix_seed(run_seed, kObservationStream));
  OracleConfig oc = oracle_config_for_mode(sc, cfg);
  oc.rng_seed = mix_seed(mix_seed(run_seed, kOracleStream), sc.oracle.rng_seed);
  OracleSimulator oracle_sim(oc);

  for (int k = 0; k <= n_kf; ++k) {
    const double t = k * sc.keyframes.interval;
    const TrajectorySample s = sample_trajectory(sc.trajectory, std::min(t, sc.trajectory.duration));
    data.keyframe_stamps.push_back(t);
    data.ground_truth.push_back(GroundTruthRecord{t, s.pose, s.velocity});

    for (const PixelObservation& o :
         observe_landmarks(s.pose, sc.camera, data.landmarks, obs_rng)) {
      data.observations.push_back(ObservationRecord{t, o.landmark_id, o.pixel});
    }
    if (k % sc.keyframes.oracle_every == 0) {
      OracleMeasurement m = oracle_sim.measure(s.pose, t);
      data.oracle_sets.push_back(OracleRecordSet{t, std::move(m.set)});
      data.oracle_labels.push_back(OracleLabel{t, m.injected_outlier});
    }
  }
  return data;
}

GraphConfig graph_config(const Scenario& sc, const RunConfig& cfg) {
  GraphConfig gc;
  gc.window_size = cfg.window_size;
  gc.gravity = sc.imu.gravity;
  gc.imu_noise = sc.imu.noise();
  gc.gyro_bias_walk = sc.imu.gyro_bias_walk;
  gc.accel_bias_walk = sc.imu.accel_bias_walk;
  gc.reproj_sigma_px = sc.camera.pixel_noise_std > 0 ? sc.camera.pixel_noise_std : 1.0;
  gc.covariance_mode = cfg.covariance;
  gc.rejection_enabled = cfg.rejection;
  gc.tau1 = cfg.tau1;
  gc.tau2 = cfg.tau2;
  gc.aleatoric_divisor = cfg.divisor;
  return gc;
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull + (b << 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::string to_string(OracleMode mode) {
  switch (mode) {
    case OracleMode::kOff: return "off";
    case OracleMode::kDropout: return "dropout";
    case OracleMode::kEnsemble: return "ensemble";
  }
  return "unknown";
}

std::string to_string(CovarianceMode mode) {
  return mode == CovarianceMode::kConstant ? "constant" : "estimated";
}

std::string config_label(OracleMode oracle, CovarianceMode covariance, bool rejection) {
  if (oracle == OracleMode::kOff) return "only_vio";
  return to_string(oracle) + "_" + to_string(covariance) +
         (rejection ? "_rejection" : "_no_rejection");
}

RunResult run(const RunConfig& cfg) {
  const Scenario sc = load_scenario(cfg.scenario_path);
  const std::uint64_t run_seed = mix_seed(sc.seed, cfg.seed);
  const std::filesystem::path dir = cfg.out_dir;
  std::filesystem::create_directories(dir);

  RunResult result;
  result.scenario_name = sc.name;
  result.config = config_label(cfg.oracle, cfg.covariance, cfg.rejection);
  result.out_dir = dir;

  // Synthesize and persist the sensor streams, then replay from disk so
  // the backend consumes exactly what a rerun would read.
  const SensorData data = synthesize(sc, cfg, run_seed);
  write_imu_csv(dir / "imu.csv", data.imu);
  write_ground_truth_csv(dir / "ground_truth.csv", data.ground_truth);
  write_observations_csv(dir / "observations.csv", data.observations);
  write_landmarks_csv(dir / "landmarks.csv", data.landmarks);
  if (cfg.oracle != OracleMode::kOff) {
    write_oracle_csv(dir / "oracle.csv", data.oracle_sets);
    write_oracle_labels_csv(dir / "oracle_labels.csv", data.oracle_labels);
  }

  const std::vector<ImuRecord> imu = read_imu_csv(dir / "imu.csv");
  const std::vector<GroundTruthRecord> gt = read_ground_truth_csv(dir / "ground_truth.csv");
  const std::vector<ObservationRecord> obs = read_observations_csv(dir / "observations.csv");
  std::vector<OracleRecordSet> oracle_sets;
  if (cfg.oracle != OracleMode::kOff) oracle_sets = read_oracle_csv(dir / "oracle.csv");

  SlidingWindowGraph graph(sc.camera, graph_config(sc, cfg));

  std::vector<EstimateRecord> estimates;
  std::ofstream timing(dir / "timing.log");
  const auto wall_start = std::chrono::steady_clock::now();

  std::size_t obs_cursor = 0;
  std::size_t oracle_cursor = 0;
  std::size_t imu_cursor = 0;
  for (std::size_t k = 0; k < data.keyframe_stamps.size(); ++k) {
    const double t = data.keyframe_stamps[k];

    std::vector<PixelObservation> kf_obs;
    while (obs_cursor < obs.size() && obs[obs_cursor].t <= t + 1e-6) {
      if (obs[obs_cursor].t >= t - 1e-6) {
        kf_obs.push_back(PixelObservation{obs[obs_cursor].landmark_id, obs[obs_cursor].pixel});
      }
      ++obs_cursor;
    }

    std::optional<PoseSampleSet> sample_set;
    if (oracle_cursor < oracle_sets.size() &&
        std::abs(oracle_sets[oracle_cursor].t - t) < 1e-6) {
      sample_set = oracle_sets[oracle_cursor].set;
      ++oracle_cursor;
    }

    std::span<const ImuRecord> segment;
    if (k > 0) {
      const double t_prev = data.keyframe_stamps[k - 1];
      std::size_t begin = imu_cursor;
      while (begin > 0 && imu[begin - 1].t >= t_prev - 1e-9) --begin;
      while (begin < imu.size() && imu[begin].t < t_prev - 1e-9) ++begin;
      std::size_t end = begin;
      while (end < imu.size() && imu[end].t <= t + 1e-9) ++end;
      segment = std::span<const ImuRecord>(imu.data() + begin, end - begin);
      imu_cursor = end > 0 ? end - 1 : 0;  // boundary sample shared with the next interval
    }

    const auto t0 = std::chrono::steady_clock::now();
    KeyframeSummary summary;
    if (k == 0) {
      NavState init;
      init.pose = gt.front().pose;
      init.velocity = gt.front().velocity;
      init.stamp = t;
      summary = graph.add_keyframe(t, segment, kf_obs, sample_set, &init);
    } else {
      summary = graph.add_keyframe(t, segment, kf_obs, sample_set);
    }
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    result.wall_ms_total += ms;
    timing << "keyframe " << k << " solve_ms " << ms << '\n';

    if (summary.solve.failed()) result.solver_failed = true;
    ++result.keyframes;

    EstimateRecord rec;
    const NavState& s = graph.latest_state();
    rec.t = t;
    rec.pose = s.pose;
    rec.velocity = s.velocity;
    rec.gyro_bias = s.gyro_bias;
    rec.accel_bias = s.accel_bias;
    if (summary.had_oracle) {
      ++result.oracle_measurements;
      if (summary.abs_factor_added) {
        rec.abs_status = "accepted";
        ++result.accepted;
      } else {
        rec.abs_status = to_string(summary.gate->status);
        if (summary.gate->status == GateStatus::kRejectedTrace) ++result.rejected_trace;
        if (summary.gate->status == GateStatus::kRejectedMahalanobis) {
          ++result.rejected_mahalanobis;
        }
      }
    }
    rec.num_imu_factors = summary.num_imu_factors;
    rec.num_reproj_factors = summary.num_reproj_factors;
    rec.num_abs_factors = summary.num_abs_factors;
    rec.cost = summary.solve.final_cost;
    rec.iterations = summary.solve.iterations;
    estimates.push_back(std::move(rec));
  }

  const double total_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - wall_start)
                              .count();
  timing << "total_ms " << total_ms << "\nkeyframe_rate_hz "
         << (total_ms > 0 ? 1000.0 * result.keyframes / total_ms : 0) << '\n';

  write_estimates_csv(dir / "estimates.csv", estimates);

  // Outlier bookkeeping: which injected sets were kept out of the graph.
  if (cfg.oracle != OracleMode::kOff) {
    for (const OracleLabel& label : data.oracle_labels) {
      if (!label.injected_outlier) continue;
      ++result.injected_outliers;
      for (const EstimateRecord& rec : estimates) {
        if (std::abs(rec.t - label.t) < 1e-6 && rec.abs_status != "accepted" &&
            rec.abs_status != "none") {
          ++result.rejected_injected_outliers;
          break;
        }
      }
    }
  }

  TrajectoryEstimate te;
  te.scenario_id = sc.name;
  te.config_label = result.config;
  for (const EstimateRecord& r : estimates) te.estimate.push_back(StampedPose{r.t, r.pose});
  for (const GroundTruthRecord& g : gt) te.ground_truth.push_back(StampedPose{g.t, g.pose});
  result.ate = ate(te, Alignment::kNone);
  write_ate_curve_csv(dir / "ate_curve.csv", ate_vs_distance(te, 1.0));

  nlohmann::json summary_json;
  summary_json["scenario"] = result.scenario_name;
  summary_json["config"] = result.config;
  summary_json["seed"] = cfg.seed;
  summary_json["keyframes"] = result.keyframes;
  summary_json["positional_ate_m"] = result.ate.positional_rmse;
  summary_json["rotational_ate_deg"] = result.ate.rotational_rmse_deg;
  summary_json["oracle_measurements"] = result.oracle_measurements;
  summary_json["accepted"] = result.accepted;
  summary_json["rejected_trace"] = result.rejected_trace;
  summary_json["rejected_mahalanobis"] = result.rejected_mahalanobis;
  summary_json["injected_outliers"] = result.injected_outliers;
  summary_json["rejected_injected_outliers"] = result.rejected_injected_outliers;
  summary_json["solver_failed"] = result.solver_failed;
  std::ofstream(dir / "summary.json") << summary_json.dump(2) << '\n';

  return result;
}

SweepResult sweep(const SweepConfig& cfg) {
  struct Cell {
    RunConfig run_cfg;
    std::string scenario_hint;
  };
  std::vector<Cell> cells;
  for (const std::filesystem::path& scenario : cfg.scenarios) {
    std::vector<std::tuple<OracleMode, CovarianceMode, bool>> combos = {
        {OracleMode::kOff, CovarianceMode::kEstimated, false}};
    if (!cfg.vio_only_only) {
      for (OracleMode om : {OracleMode::kDropout, OracleMode::kEnsemble}) {
        for (CovarianceMode cm : {CovarianceMode::kConstant, CovarianceMode::kEstimated}) {
          for (bool rej : {false, true}) combos.emplace_back(om, cm, rej);
        }
      }
    }
    for (const auto& [om, cm, rej] : combos) {
      RunConfig rc;
      rc.scenario_path = scenario;
      rc.oracle = om;
      rc.covariance = cm;
      rc.rejection = rej;
      rc.seed = cfg.seed;
      rc.window_size = cfg.window_size;
      rc.tau1 = cfg.tau1;
      rc.tau2 = cfg.tau2;
      rc.kappa = cfg.kappa;
      rc.divisor = cfg.divisor;
      rc.outlier_prob_override = cfg.outlier_prob_override;
      rc.outlier_magnitude_override = cfg.outlier_magnitude_override;
      rc.out_dir = cfg.out_root / scenario.stem() / config_label(om, cm, rej);
      cells.push_back(Cell{rc, scenario.stem().string()});
    }
  }

  struct Outcome {
    RunRecordRow row;
    std::optional<RunResult> result;
  };
  std::vector<Outcome> outcomes(cells.size());
  const auto execute = [&](std::size_t i) {
    Outcome& o = outcomes[i];
    try {
      RunResult r = run(cells[i].run_cfg);
      o.row = RunRecordRow{r.scenario_name, r.config, r.ate.positional_rmse,
                           r.ate.rotational_rmse_deg, r.solver_failed,
                           r.solver_failed ? "solver failure" : ""};
      o.result = std::move(r);
    } catch (const std::exception& e) {
      o.row = RunRecordRow{cells[i].scenario_hint,
                           config_label(cells[i].run_cfg.oracle, cells[i].run_cfg.covariance,
                                        cells[i].run_cfg.rejection),
                           0, 0, true, e.what()};
    }
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) execute(i);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      pending.push_back(std::async(std::launch::async, execute, i));
      if (pending.size() >= static_cast<std::size_t>(jobs)) {
        pending.front().get();
        pending.erase(pending.begin());
      }
    }
    for (auto& f : pending) f.get();
  }

  SweepResult out;
  for (Outcome& o : outcomes) {
    out.rows.push_back(o.row);
    if (o.row.failed) ++out.failed_runs;
    if (o.result) out.runs.push_back(std::move(*o.result));
  }

  std::filesystem::create_directories(cfg.out_root);
  const AblationReport report = ablation_report(out.rows);
  out.report_csv = cfg.out_root / "report.csv";
  out.report_txt = cfg.out_root / "report.txt";
  write_report_csv(report, out.report_csv);
  write_report_txt(report, out.report_txt);

  std::ofstream manifest(cfg.out_root / "sweep_manifest.csv");
  manifest << "scenario,config,status,error\n";
  for (const RunRecordRow& r : out.rows) {
    std::string err = r.error;
    for (char& c : err) {
      if (c == ',' || c == '\n') c = ';';
    }
    manifest << r.scenario << ',' << r.config << ',' << (r.failed ? "failed" : "ok") << ','
             << err << '\n';
  }
  return out;
}

}  // namespace apvio

#include "apvio/scenario.hpp"

#include <fstream>

#include <json.hpp>

#include <Eigen/Geometry>

#include "apvio/errors.hpp"

namespace apvio {

namespace {

using nlohmann::json;

Vec3d to_vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("expected a 3-element array");
  return Vec3d(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

json from_vec3(const Vec3d& v) { return json::array({v.x(), v.y(), v.z()}); }

TrajectoryKind parse_kind(const std::string& s) {
  if (s == "lemniscate") return TrajectoryKind::kLemniscate;
  if (s == "lissajous") return TrajectoryKind::kLissajous;
  throw ConfigError("unknown trajectory kind: " + s);
}

YawMode parse_yaw(const std::string& s) {
  if (s == "tangent") return YawMode::kTangent;
  if (s == "fixed") return YawMode::kFixed;
  throw ConfigError("unknown yaw mode: " + s);
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw ScenarioNotFound("scenario file not found: " + path.string());
  }
  std::ifstream in(path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("scenario parse error in " + path.string() + ": " + e.what());
  }

  Scenario sc;
  try {
    sc.name = j.at("name").get<std::string>();
    sc.seed = j.at("seed").get<std::uint64_t>();

    const json& jt = j.at("trajectory");
    sc.trajectory.kind = parse_kind(jt.at("kind").get<std::string>());
    sc.trajectory.amplitudes = to_vec3(jt.at("amplitudes"));
    sc.trajectory.angular_freqs = to_vec3(jt.at("angular_freqs"));
    sc.trajectory.phases = to_vec3(jt.at("phases"));
    sc.trajectory.center = to_vec3(jt.at("center"));
    sc.trajectory.duration = jt.at("duration").get<double>();
    sc.trajectory.yaw_mode = parse_yaw(jt.at("yaw_mode").get<std::string>());
    if (sc.trajectory.duration <= 0) throw ConfigError("trajectory duration must be > 0");
    if ((sc.trajectory.amplitudes.array() < 0).any()) {
      throw ConfigError("trajectory amplitudes must be >= 0");
    }

    const json& ji = j.at("imu");
    sc.imu.rate = ji.at("rate").get<double>();
    sc.imu.gyro_noise_density = ji.at("gyro_noise_density").get<double>();
    sc.imu.accel_noise_density = ji.at("accel_noise_density").get<double>();
    sc.imu.gyro_bias_walk = ji.at("gyro_bias_walk").get<double>();
    sc.imu.accel_bias_walk = ji.at("accel_bias_walk").get<double>();
    sc.imu.initial_bias.gyro = to_vec3(ji.at("initial_gyro_bias"));
    sc.imu.initial_bias.accel = to_vec3(ji.at("initial_accel_bias"));
    if (ji.contains("gravity")) sc.imu.gravity = to_vec3(ji.at("gravity"));
    if (sc.imu.rate <= 0) throw ConfigError("imu rate must be > 0");

    const json& jc = j.at("camera");
    sc.camera.fx = jc.at("fx").get<double>();
    sc.camera.fy = jc.at("fy").get<double>();
    sc.camera.cx = jc.at("cx").get<double>();
    sc.camera.cy = jc.at("cy").get<double>();
    sc.camera.width = jc.at("width").get<int>();
    sc.camera.height = jc.at("height").get<int>();
    sc.camera.pixel_noise_std = jc.at("pixel_noise_std").get<double>();
    if (sc.camera.fx <= 0 || sc.camera.fy <= 0) throw ConfigError("camera focal must be > 0");
    const json& je = jc.at("body_to_camera");
    const json& jq = je.at("quaternion_wxyz");
    sc.camera.body_to_camera.rotation =
        Eigen::Quaterniond(jq[0].get<double>(), jq[1].get<double>(), jq[2].get<double>(),
                           jq[3].get<double>())
            .normalized()
            .toRotationMatrix();
    sc.camera.body_to_camera.position = to_vec3(je.at("position"));

    const json& jl = j.at("landmarks");
    sc.landmarks.region = Eigen::AlignedBox3d(to_vec3(jl.at("region_min")),
                                              to_vec3(jl.at("region_max")));
    sc.landmarks.count = jl.at("count").get<int>();
    sc.landmarks.seed = jl.at("seed").get<std::uint64_t>();
    if (sc.landmarks.count <= 0) throw ConfigError("landmark count must be > 0");

    const json& jo = j.at("oracle");
    sc.oracle.sample_count = jo.at("sample_count").get<int>();
    sc.oracle.pos_noise_std = to_vec3(jo.at("pos_noise_std"));
    sc.oracle.rot_noise_std = jo.at("rot_noise_std").get<double>();
    const json& ja = jo.at("aleatoric");
    const std::string mode = ja.at("mode").get<std::string>();
    if (mode == "fixed") {
      sc.oracle.aleatoric_mode = AleatoricMode::kFixed;
      sc.oracle.aleatoric_reported_var = to_vec3(ja.at("var"));
    } else if (mode == "heteroscedastic") {
      sc.oracle.aleatoric_mode = AleatoricMode::kHeteroscedastic;
      sc.oracle.heteroscedastic_scale = ja.at("scale").get<double>();
    } else {
      throw ConfigError("unknown aleatoric mode: " + mode);
    }
    sc.oracle.ood_zones.clear();
    for (const json& jz : jo.value("ood_zones", json::array())) {
      OodZone z;
      z.box = Eigen::AlignedBox3d(to_vec3(jz.at("min")), to_vec3(jz.at("max")));
      z.bias = to_vec3(jz.at("bias"));
      z.spread_multiplier = jz.at("spread_multiplier").get<double>();
      sc.oracle.ood_zones.push_back(z);
    }
    sc.oracle.outlier_prob = jo.at("outlier_prob").get<double>();
    sc.oracle.outlier_magnitude = jo.at("outlier_magnitude").get<double>();
    sc.oracle.outlier_per_sample = jo.value("outlier_per_sample", false);
    sc.oracle.rng_seed = jo.at("seed").get<std::uint64_t>();

    const json& jk = j.at("keyframes");
    sc.keyframes.interval = jk.at("interval").get<double>();
    sc.keyframes.oracle_every = jk.at("oracle_every").get<int>();
    if (sc.keyframes.interval <= 0) throw ConfigError("keyframe interval must be > 0");
    if (sc.keyframes.oracle_every < 1) throw ConfigError("oracle_every must be >= 1");
  } catch (const json::exception& e) {
    throw ConfigError("scenario field error in " + path.string() + ": " + e.what());
  }
  return sc;
}

void save_scenario(const Scenario& sc, const std::filesystem::path& path) {
  json j;
  j["name"] = sc.name;
  j["seed"] = sc.seed;
  j["trajectory"] = {
      {"kind", sc.trajectory.kind == TrajectoryKind::kLemniscate ? "lemniscate" : "lissajous"},
      {"amplitudes", from_vec3(sc.trajectory.amplitudes)},
      {"angular_freqs", from_vec3(sc.trajectory.angular_freqs)},
      {"phases", from_vec3(sc.trajectory.phases)},
      {"center", from_vec3(sc.trajectory.center)},
      {"duration", sc.trajectory.duration},
      {"yaw_mode", sc.trajectory.yaw_mode == YawMode::kTangent ? "tangent" : "fixed"},
  };
  j["imu"] = {
      {"rate", sc.imu.rate},
      {"gyro_noise_density", sc.imu.gyro_noise_density},
      {"accel_noise_density", sc.imu.accel_noise_density},
      {"gyro_bias_walk", sc.imu.gyro_bias_walk},
      {"accel_bias_walk", sc.imu.accel_bias_walk},
      {"initial_gyro_bias", from_vec3(sc.imu.initial_bias.gyro)},
      {"initial_accel_bias", from_vec3(sc.imu.initial_bias.accel)},
      {"gravity", from_vec3(sc.imu.gravity)},
  };
  const Eigen::Quaterniond q(sc.camera.body_to_camera.rotation);
  j["camera"] = {
      {"fx", sc.camera.fx},
      {"fy", sc.camera.fy},
      {"cx", sc.camera.cx},
      {"cy", sc.camera.cy},
      {"width", sc.camera.width},
      {"height", sc.camera.height},
      {"pixel_noise_std", sc.camera.pixel_noise_std},
      {"body_to_camera",
       {{"quaternion_wxyz", json::array({q.w(), q.x(), q.y(), q.z()})},
        {"position", from_vec3(sc.camera.body_to_camera.position)}}},
  };
  j["landmarks"] = {
      {"region_min", from_vec3(sc.landmarks.region.min())},
      {"region_max", from_vec3(sc.landmarks.region.max())},
      {"count", sc.landmarks.count},
      {"seed", sc.landmarks.seed},
  };
  json zones = json::array();
  for (const OodZone& z : sc.oracle.ood_zones) {
    zones.push_back({{"min", from_vec3(z.box.min())},
                     {"max", from_vec3(z.box.max())},
                     {"bias", from_vec3(z.bias)},
                     {"spread_multiplier", z.spread_multiplier}});
  }
  json aleatoric;
  if (sc.oracle.aleatoric_mode == AleatoricMode::kFixed) {
    aleatoric = {{"mode", "fixed"}, {"var", from_vec3(sc.oracle.aleatoric_reported_var)}};
  } else {
    aleatoric = {{"mode", "heteroscedastic"}, {"scale", sc.oracle.heteroscedastic_scale}};
  }
  j["oracle"] = {
      {"sample_count", sc.oracle.sample_count},
      {"pos_noise_std", from_vec3(sc.oracle.pos_noise_std)},
      {"rot_noise_std", sc.oracle.rot_noise_std},
      {"aleatoric", aleatoric},
      {"ood_zones", zones},
      {"outlier_prob", sc.oracle.outlier_prob},
      {"outlier_magnitude", sc.oracle.outlier_magnitude},
      {"outlier_per_sample", sc.oracle.outlier_per_sample},
      {"seed", sc.oracle.rng_seed},
  };
  j["keyframes"] = {
      {"interval", sc.keyframes.interval},
      {"oracle_every", sc.keyframes.oracle_every},
  };

  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario: " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace apvio

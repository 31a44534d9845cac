#include "apvio/records.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>

#include "apvio/errors.hpp"

namespace apvio {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open for reading: " + path.string());
  return in;
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, sep)) fields.push_back(field);
  return fields;
}

double to_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

void append(std::string& row, double v) {
  row += ',';
  row += format_csv_double(v);
}

void append_quaternion(std::string& row, const Mat3d& r) {
  const Eigen::Quaterniond q(r);
  append(row, q.w());
  append(row, q.x());
  append(row, q.y());
  append(row, q.z());
}

Mat3d quaternion_cols(const std::vector<std::string>& f, std::size_t base) {
  const Eigen::Quaterniond q(to_double(f[base]), to_double(f[base + 1]), to_double(f[base + 2]),
                             to_double(f[base + 3]));
  return q.normalized().toRotationMatrix();
}

}  // namespace

std::string format_csv_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void write_imu_csv(const std::filesystem::path& path, std::span<const ImuRecord> records) {
  auto out = open_out(path);
  out << "t,gx,gy,gz,ax,ay,az\n";
  for (const ImuRecord& r : records) {
    std::string row = format_csv_double(r.t);
    for (int i = 0; i < 3; ++i) append(row, r.gyro[i]);
    for (int i = 0; i < 3; ++i) append(row, r.accel[i]);
    out << row << '\n';
  }
}

std::vector<ImuRecord> read_imu_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<ImuRecord> records;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 7) throw ConfigError("imu csv: bad row in " + path.string());
    ImuRecord r;
    r.t = to_double(f[0]);
    r.gyro = Vec3d(to_double(f[1]), to_double(f[2]), to_double(f[3]));
    r.accel = Vec3d(to_double(f[4]), to_double(f[5]), to_double(f[6]));
    records.push_back(r);
  }
  return records;
}

void write_ground_truth_csv(const std::filesystem::path& path,
                            std::span<const GroundTruthRecord> records) {
  auto out = open_out(path);
  out << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz\n";
  for (const GroundTruthRecord& r : records) {
    std::string row = format_csv_double(r.t);
    for (int i = 0; i < 3; ++i) append(row, r.pose.position[i]);
    append_quaternion(row, r.pose.rotation);
    for (int i = 0; i < 3; ++i) append(row, r.velocity[i]);
    out << row << '\n';
  }
}

std::vector<GroundTruthRecord> read_ground_truth_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<GroundTruthRecord> records;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 11) throw ConfigError("ground truth csv: bad row in " + path.string());
    GroundTruthRecord r;
    r.t = to_double(f[0]);
    r.pose.position = Vec3d(to_double(f[1]), to_double(f[2]), to_double(f[3]));
    r.pose.rotation = quaternion_cols(f, 4);
    r.velocity = Vec3d(to_double(f[8]), to_double(f[9]), to_double(f[10]));
    records.push_back(r);
  }
  return records;
}

void write_observations_csv(const std::filesystem::path& path,
                            std::span<const ObservationRecord> records) {
  auto out = open_out(path);
  out << "t,landmark_id,u,v\n";
  for (const ObservationRecord& r : records) {
    std::string row = format_csv_double(r.t);
    row += ',';
    row += std::to_string(r.landmark_id);
    append(row, r.pixel.x());
    append(row, r.pixel.y());
    out << row << '\n';
  }
}

std::vector<ObservationRecord> read_observations_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<ObservationRecord> records;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw ConfigError("observations csv: bad row in " + path.string());
    records.push_back(ObservationRecord{to_double(f[0]), std::atoi(f[1].c_str()),
                                        Eigen::Vector2d(to_double(f[2]), to_double(f[3]))});
  }
  return records;
}

void write_oracle_csv(const std::filesystem::path& path, std::span<const OracleRecordSet> sets) {
  auto out = open_out(path);
  out << "t,sample,px,py,pz,r00,r01,r02,r10,r11,r12,r20,r21,r22,var_x,var_y,var_z,kappa_inv\n";
  for (const OracleRecordSet& rec : sets) {
    for (std::size_t i = 0; i < rec.set.samples.size(); ++i) {
      const PoseSample& s = rec.set.samples[i];
      std::string row = format_csv_double(rec.t);
      row += ',';
      row += std::to_string(i);
      for (int k = 0; k < 3; ++k) append(row, s.position[k]);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) append(row, s.rotation(r, c));
      }
      for (int k = 0; k < 3; ++k) append(row, s.aleatoric_pos_var[k]);
      append(row, rec.set.kappa_inv);
      out << row << '\n';
    }
  }
}

std::vector<OracleRecordSet> read_oracle_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<OracleRecordSet> sets;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 18) throw ConfigError("oracle csv: bad row in " + path.string());
    const double t = to_double(f[0]);
    if (sets.empty() || sets.back().t != t) {
      sets.push_back(OracleRecordSet{t, PoseSampleSet{}});
    }
    PoseSample s;
    s.position = Vec3d(to_double(f[2]), to_double(f[3]), to_double(f[4]));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) s.rotation(r, c) = to_double(f[5 + 3 * r + c]);
    }
    s.aleatoric_pos_var = Vec3d(to_double(f[14]), to_double(f[15]), to_double(f[16]));
    sets.back().set.kappa_inv = to_double(f[17]);
    sets.back().set.samples.push_back(std::move(s));
  }
  return sets;
}

void write_oracle_labels_csv(const std::filesystem::path& path,
                             std::span<const OracleLabel> labels) {
  auto out = open_out(path);
  out << "t,injected_outlier\n";
  for (const OracleLabel& l : labels) {
    out << format_csv_double(l.t) << ',' << (l.injected_outlier ? 1 : 0) << '\n';
  }
}

std::vector<OracleLabel> read_oracle_labels_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<OracleLabel> labels;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 2) throw ConfigError("oracle labels csv: bad row in " + path.string());
    labels.push_back(OracleLabel{to_double(f[0]), std::atoi(f[1].c_str()) != 0});
  }
  return labels;
}

void write_landmarks_csv(const std::filesystem::path& path,
                         std::span<const Landmark> landmarks) {
  auto out = open_out(path);
  out << "id,x,y,z\n";
  for (const Landmark& lm : landmarks) {
    std::string row = std::to_string(lm.id);
    for (int k = 0; k < 3; ++k) append(row, lm.position[k]);
    out << row << '\n';
  }
}

std::vector<Landmark> read_landmarks_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Landmark> landmarks;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) throw ConfigError("landmarks csv: bad row in " + path.string());
    landmarks.push_back(Landmark{std::atoi(f[0].c_str()),
                                 Vec3d(to_double(f[1]), to_double(f[2]), to_double(f[3]))});
  }
  return landmarks;
}

void write_estimates_csv(const std::filesystem::path& path,
                         std::span<const EstimateRecord> records) {
  auto out = open_out(path);
  out << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz,bgx,bgy,bgz,bax,bay,baz,"
         "abs_status,num_imu,num_reproj,num_abs,cost,iterations\n";
  for (const EstimateRecord& r : records) {
    std::string row = format_csv_double(r.t);
    for (int i = 0; i < 3; ++i) append(row, r.pose.position[i]);
    append_quaternion(row, r.pose.rotation);
    for (int i = 0; i < 3; ++i) append(row, r.velocity[i]);
    for (int i = 0; i < 3; ++i) append(row, r.gyro_bias[i]);
    for (int i = 0; i < 3; ++i) append(row, r.accel_bias[i]);
    row += ',' + r.abs_status;
    row += ',' + std::to_string(r.num_imu_factors);
    row += ',' + std::to_string(r.num_reproj_factors);
    row += ',' + std::to_string(r.num_abs_factors);
    append(row, r.cost);
    row += ',' + std::to_string(r.iterations);
    out << row << '\n';
  }
}

std::vector<EstimateRecord> read_estimates_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<EstimateRecord> records;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 23) throw ConfigError("estimates csv: bad row in " + path.string());
    EstimateRecord r;
    r.t = to_double(f[0]);
    r.pose.position = Vec3d(to_double(f[1]), to_double(f[2]), to_double(f[3]));
    r.pose.rotation = quaternion_cols(f, 4);
    r.velocity = Vec3d(to_double(f[8]), to_double(f[9]), to_double(f[10]));
    r.gyro_bias = Vec3d(to_double(f[11]), to_double(f[12]), to_double(f[13]));
    r.accel_bias = Vec3d(to_double(f[14]), to_double(f[15]), to_double(f[16]));
    r.abs_status = f[17];
    r.num_imu_factors = std::atoi(f[18].c_str());
    r.num_reproj_factors = std::atoi(f[19].c_str());
    r.num_abs_factors = std::atoi(f[20].c_str());
    r.cost = to_double(f[21]);
    r.iterations = std::atoi(f[22].c_str());
    records.push_back(std::move(r));
  }
  return records;
}

}  // namespace apvio

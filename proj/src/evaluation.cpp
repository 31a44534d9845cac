#include "apvio/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "apvio/errors.hpp"
#include "apvio/records.hpp"

namespace apvio {

namespace {

constexpr double kAssocWindow = 1e-3;  // s

struct Pair {
  Posed est;
  Posed gt;
};

std::vector<Pair> associate(const TrajectoryEstimate& te) {
  std::vector<Pair> pairs;
  if (te.ground_truth.empty()) return pairs;
  for (const StampedPose& e : te.estimate) {
    const auto it = std::lower_bound(
        te.ground_truth.begin(), te.ground_truth.end(), e.t,
        [](const StampedPose& g, double t) { return g.t < t; });
    const StampedPose* best = nullptr;
    if (it != te.ground_truth.end()) best = &*it;
    if (it != te.ground_truth.begin()) {
      const StampedPose* prev = &*(it - 1);
      if (best == nullptr || std::abs(prev->t - e.t) < std::abs(best->t - e.t)) best = prev;
    }
    if (best != nullptr && std::abs(best->t - e.t) <= kAssocWindow) {
      pairs.push_back(Pair{e.pose, best->pose});
    }
  }
  return pairs;
}

// Optimal 4-DoF (yaw about z + translation) alignment of est onto gt.
std::pair<Mat3d, Vec3d> fit_yaw_translation(const std::vector<Pair>& pairs) {
  Vec3d mean_e = Vec3d::Zero(), mean_g = Vec3d::Zero();
  for (const Pair& p : pairs) {
    mean_e += p.est.position;
    mean_g += p.gt.position;
  }
  mean_e /= static_cast<double>(pairs.size());
  mean_g /= static_cast<double>(pairs.size());

  double a = 0, b = 0;
  for (const Pair& p : pairs) {
    const Vec3d e = p.est.position - mean_e;
    const Vec3d g = p.gt.position - mean_g;
    a += e.x() * g.x() + e.y() * g.y();
    b += e.x() * g.y() - e.y() * g.x();
  }
  const double yaw = std::atan2(b, a);
  const Mat3d r = exp_so3(Vec3d(0, 0, yaw));
  return {r, mean_g - r * mean_e};
}

}  // namespace

AteResult ate(const TrajectoryEstimate& te, Alignment align) {
  std::vector<Pair> pairs = associate(te);
  if (pairs.size() < 2) throw EmptyAssociation("ate: fewer than 2 associated pairs");

  if (align == Alignment::kYawTranslation) {
    const auto [r, t] = fit_yaw_translation(pairs);
    for (Pair& p : pairs) {
      p.est.position = r * p.est.position + t;
      p.est.rotation = r * p.est.rotation;
    }
  }

  double pos_sq = 0, rot_sq = 0;
  for (const Pair& p : pairs) {
    pos_sq += (p.est.position - p.gt.position).squaredNorm();
    const double angle =
        log_so3((p.gt.rotation.transpose() * p.est.rotation).eval()).norm();
    const double deg = angle * 180.0 / M_PI;
    rot_sq += deg * deg;
  }
  AteResult out;
  out.pairs = static_cast<int>(pairs.size());
  out.positional_rmse = std::sqrt(pos_sq / static_cast<double>(pairs.size()));
  out.rotational_rmse_deg = std::sqrt(rot_sq / static_cast<double>(pairs.size()));
  return out;
}

std::vector<AteCurvePoint> ate_vs_distance(const TrajectoryEstimate& te, double bin) {
  const std::vector<Pair> pairs = associate(te);
  if (pairs.size() < 2) throw EmptyAssociation("ate_vs_distance: fewer than 2 associated pairs");

  std::vector<AteCurvePoint> curve;
  double distance = 0;
  double pos_sq = 0;
  double next_edge = bin > 0 ? bin : 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) distance += (pairs[i].gt.position - pairs[i - 1].gt.position).norm();
    pos_sq += (pairs[i].est.position - pairs[i].gt.position).squaredNorm();
    const double running = std::sqrt(pos_sq / static_cast<double>(i + 1));
    const bool last = i + 1 == pairs.size();
    if (last || distance >= next_edge) {
      curve.push_back(AteCurvePoint{distance, running});
      while (bin > 0 && next_edge <= distance) next_edge += bin;
    }
  }
  return curve;
}

void write_ate_curve_csv(const std::filesystem::path& path,
                         std::span<const AteCurvePoint> curve) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write ate curve: " + path.string());
  out << "distance_m,running_ate_m\n";
  for (const AteCurvePoint& p : curve) {
    out << format_csv_double(p.distance) << ',' << format_csv_double(p.running_ate) << '\n';
  }
}

std::vector<AteCurvePoint> read_ate_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read ate curve: " + path.string());
  std::vector<AteCurvePoint> curve;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    curve.push_back(AteCurvePoint{std::strtod(line.c_str(), nullptr),
                                  std::strtod(line.c_str() + comma + 1, nullptr)});
  }
  return curve;
}

double ate_curve_tail_slope(std::span<const AteCurvePoint> curve, double fraction) {
  if (curve.size() < 2) return 0;
  const double total = curve.back().distance;
  const double start = total * (1.0 - fraction);
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const AteCurvePoint& p : curve) {
    if (p.distance < start) continue;
    sx += p.distance;
    sy += p.running_ate;
    sxx += p.distance * p.distance;
    sxy += p.distance * p.running_ate;
    ++n;
  }
  if (n < 2) return 0;
  const double denom = n * sxx - sx * sx;
  return denom == 0 ? 0 : (n * sxy - sx * sy) / denom;
}

const std::vector<std::string>& ablation_config_order() {
  static const std::vector<std::string> order = {
      "only_vio",
      "dropout_constant_no_rejection",
      "ensemble_constant_no_rejection",
      "dropout_estimated_no_rejection",
      "ensemble_estimated_no_rejection",
      "dropout_constant_rejection",
      "ensemble_constant_rejection",
      "dropout_estimated_rejection",
      "ensemble_estimated_rejection",
  };
  return order;
}

AblationReport ablation_report(std::span<const RunRecordRow> rows) {
  AblationReport rep;
  rep.configs = ablation_config_order();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (const RunRecordRow& r : rows) {
    if (std::find(rep.scenarios.begin(), rep.scenarios.end(), r.scenario) ==
        rep.scenarios.end()) {
      rep.scenarios.push_back(r.scenario);
    }
  }
  std::sort(rep.scenarios.begin(), rep.scenarios.end());

  rep.cells.assign(rep.scenarios.size() + 1,
                   std::vector<std::pair<double, double>>(rep.configs.size(), {nan, nan}));
  for (const RunRecordRow& r : rows) {
    const auto srow = std::find(rep.scenarios.begin(), rep.scenarios.end(), r.scenario) -
                      rep.scenarios.begin();
    const auto ccol =
        std::find(rep.configs.begin(), rep.configs.end(), r.config) - rep.configs.begin();
    if (ccol == static_cast<long>(rep.configs.size())) continue;  // unknown label
    if (!r.failed) rep.cells[srow][ccol] = {r.positional_ate, r.rotational_ate_deg};
  }

  // Average row over scenarios with a value.
  const std::size_t avg = rep.scenarios.size();
  for (std::size_t c = 0; c < rep.configs.size(); ++c) {
    double pos = 0, rot = 0;
    int n = 0;
    for (std::size_t s = 0; s < rep.scenarios.size(); ++s) {
      if (std::isnan(rep.cells[s][c].first)) continue;
      pos += rep.cells[s][c].first;
      rot += rep.cells[s][c].second;
      ++n;
    }
    rep.cells[avg][c] = n > 0 ? std::pair<double, double>{pos / n, rot / n}
                              : std::pair<double, double>{nan, nan};
  }
  rep.scenarios.push_back("Average");

  // Best / second-best per row, only-VIO column excluded.
  for (const auto& row : rep.cells) {
    const auto rank = [&row](auto value_of) {
      int best = -1, second = -1;
      for (std::size_t c = 1; c < row.size(); ++c) {
        const double v = value_of(row[c]);
        if (std::isnan(v)) continue;
        if (best < 0 || v < value_of(row[best])) {
          second = best;
          best = static_cast<int>(c);
        } else if (second < 0 || v < value_of(row[second])) {
          second = static_cast<int>(c);
        }
      }
      return std::pair<int, int>{best, second};
    };
    rep.best_pos.push_back(rank([](const auto& cell) { return cell.first; }));
    rep.best_rot.push_back(rank([](const auto& cell) { return cell.second; }));
  }
  return rep;
}

void write_report_csv(const AblationReport& rep, const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report: " + path.string());
  out << "scenario,config,positional_ate_m,rotational_ate_deg,rank_pos,rank_rot\n";
  for (std::size_t s = 0; s < rep.scenarios.size(); ++s) {
    for (std::size_t c = 0; c < rep.configs.size(); ++c) {
      const auto [pos, rot] = rep.cells[s][c];
      int rank_pos = 0, rank_rot = 0;
      if (static_cast<int>(c) == rep.best_pos[s].first) rank_pos = 1;
      if (static_cast<int>(c) == rep.best_pos[s].second) rank_pos = 2;
      if (static_cast<int>(c) == rep.best_rot[s].first) rank_rot = 1;
      if (static_cast<int>(c) == rep.best_rot[s].second) rank_rot = 2;
      out << rep.scenarios[s] << ',' << rep.configs[c] << ',' << format_csv_double(pos) << ','
          << format_csv_double(rot) << ',' << rank_pos << ',' << rank_rot << '\n';
    }
  }
}

void write_report_txt(const AblationReport& rep, const std::filesystem::path& path) {
  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write report: " + path.string());

  constexpr int kCell = 18;
  out << "Positional / rotational RMSE (m / deg). '*' best, '+' second best "
         "positional per row (only_vio excluded).\n\n";
  out << std::string(14, ' ');
  for (const std::string& c : rep.configs) {
    std::string head = c.substr(0, kCell - 1);
    out << head << std::string(kCell - head.size(), ' ');
  }
  out << '\n';
  for (std::size_t s = 0; s < rep.scenarios.size(); ++s) {
    std::string label = rep.scenarios[s].substr(0, 13);
    out << label << std::string(14 - label.size(), ' ');
    for (std::size_t c = 0; c < rep.configs.size(); ++c) {
      const auto [pos, rot] = rep.cells[s][c];
      std::ostringstream cell;
      if (static_cast<int>(c) == rep.best_pos[s].first) cell << '*';
      if (static_cast<int>(c) == rep.best_pos[s].second) cell << '+';
      if (std::isnan(pos)) {
        cell << "-";
      } else {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3f/%.2f", pos, rot);
        cell << buf;
      }
      std::string text = cell.str().substr(0, kCell - 1);
      out << text << std::string(kCell - text.size(), ' ');
    }
    out << '\n';
  }
}

}  // namespace apvio

#include "apvio/sliding_window.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCholesky>

#include "apvio/errors.hpp"

namespace apvio {

namespace {

constexpr double kDeactivatedPenalty = 1e8;  // active factor pushed behind the camera
constexpr double kCovJitter = 1e-12;

// Whitener L^{-1} from a covariance LLT, with escalating jitter on failure.
template <int N>
Eigen::Matrix<double, N, N> sqrt_info_from_cov(Eigen::Matrix<double, N, N> cov) {
  cov = 0.5 * (cov + cov.transpose()).eval();
  double jitter = kCovJitter * std::max(1.0, cov.trace() / N);
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::LLT<Eigen::Matrix<double, N, N>> llt(cov);
    if (llt.info() == Eigen::Success) {
      return llt.matrixL().solve(Eigen::Matrix<double, N, N>::Identity());
    }
    cov += jitter * Eigen::Matrix<double, N, N>::Identity();
    jitter *= 100.0;
  }
  throw SolverFailure("sqrt_info_from_cov: covariance not positive definite");
}

Eigen::Matrix<double, 15, 1> prior_residual(const NavState& mean, const NavState& state) {
  Eigen::Matrix<double, 15, 1> r;
  r.segment<3>(0) = log_so3((mean.pose.rotation.transpose() * state.pose.rotation).eval());
  r.segment<3>(3) = state.pose.position - mean.pose.position;
  r.segment<3>(6) = state.velocity - mean.velocity;
  r.segment<3>(9) = state.gyro_bias - mean.gyro_bias;
  r.segment<3>(12) = state.accel_bias - mean.accel_bias;
  return r;
}

}  // namespace

std::string to_string(SolveTermination t) {
  switch (t) {
    case SolveTermination::kConverged: return "converged";
    case SolveTermination::kSmallGradient: return "small_gradient";
    case SolveTermination::kMaxIterations: return "max_iterations";
    case SolveTermination::kNotConverged: return "not_converged";
    case SolveTermination::kIndefiniteSystem: return "indefinite_system";
  }
  return "unknown";
}

SlidingWindowGraph::SlidingWindowGraph(CameraModel cam, GraphConfig cfg)
    : cam_(std::move(cam)), cfg_(std::move(cfg)) {}

int SlidingWindowGraph::state_index(int kf_id) const {
  const auto it = std::find(kf_ids_.begin(), kf_ids_.end(), kf_id);
  if (it == kf_ids_.end()) throw std::logic_error("state_index: keyframe not in window");
  return static_cast<int>(it - kf_ids_.begin());
}

void SlidingWindowGraph::attach_first(const NavState& state, double stamp) {
  NavState s = state;
  s.stamp = stamp;
  states_.push_back(s);
  kf_ids_.push_back(next_kf_id_++);

  Eigen::Matrix<double, 15, 15> cov = Eigen::Matrix<double, 15, 15>::Zero();
  cov.diagonal().segment<3>(0).setConstant(cfg_.prior_rot_sigma * cfg_.prior_rot_sigma);
  cov.diagonal().segment<3>(3).setConstant(cfg_.prior_pos_sigma * cfg_.prior_pos_sigma);
  cov.diagonal().segment<3>(6).setConstant(cfg_.prior_vel_sigma * cfg_.prior_vel_sigma);
  cov.diagonal().segment<3>(9).setConstant(cfg_.prior_gyro_bias_sigma * cfg_.prior_gyro_bias_sigma);
  cov.diagonal().segment<3>(12).setConstant(cfg_.prior_accel_bias_sigma *
                                            cfg_.prior_accel_bias_sigma);
  priors_.push_back(PriorFactorData{kf_ids_.back(), s, sqrt_info_from_cov<15>(cov)});
}

KeyframeSummary SlidingWindowGraph::add_keyframe(double stamp,
                                                 std::span<const ImuRecord> imu_segment,
                                                 std::span<const PixelObservation> observations,
                                                 const std::optional<PoseSampleSet>& oracle_set,
                                                 const NavState* initial_state) {
  KeyframeSummary summary;
  summary.stamp = stamp;

  if (states_.empty()) {
    if (initial_state == nullptr) {
      throw std::invalid_argument("add_keyframe: first keyframe needs an initial state");
    }
    attach_first(*initial_state, stamp);
  } else {
    if (stamp <= states_.back().stamp) {
      throw NonMonotonicTime("add_keyframe: keyframe stamps must increase");
    }
    const NavState& prev = states_.back();
    PreintegratedImu pre = preintegrate(
        imu_segment, ImuBias{prev.gyro_bias, prev.accel_bias}, cfg_.imu_noise);
    NavState next = propagate(prev, pre, cfg_.gravity);
    next.stamp = stamp;

    const double dt = std::max(pre.dt_total, 1e-9);
    Eigen::Matrix<double, 9, 9> imu_cov = pre.noise_cov;
    imu_cov.diagonal().array() += kCovJitter;
    ImuFactorData imu_factor{kf_ids_.back(), next_kf_id_, std::move(pre),
                             sqrt_info_from_cov<9>(imu_cov)};

    BiasWalkFactorData walk;
    walk.kf_i = kf_ids_.back();
    walk.kf_j = next_kf_id_;
    const double var_g = cfg_.gyro_bias_walk * cfg_.gyro_bias_walk * dt + kCovJitter;
    const double var_a = cfg_.accel_bias_walk * cfg_.accel_bias_walk * dt + kCovJitter;
    walk.inv_sigma.head<3>().setConstant(1.0 / std::sqrt(var_g));
    walk.inv_sigma.tail<3>().setConstant(1.0 / std::sqrt(var_a));

    states_.push_back(next);
    kf_ids_.push_back(next_kf_id_++);
    imu_factors_.push_back(std::move(imu_factor));
    bias_factors_.push_back(walk);
  }
  summary.keyframe_id = kf_ids_.back();

  for (const PixelObservation& obs : observations) {
    landmarks_[obs.landmark_id].obs.push_back(LandmarkObs{kf_ids_.back(), obs.pixel});
  }
  try_initialize_landmarks();

  if (oracle_set.has_value()) {
    summary.had_oracle = true;
    UncertainPose meas = aggregate(*oracle_set, cfg_.aleatoric_divisor);
    if (cfg_.covariance_mode == CovarianceMode::kConstant) {
      meas.pos_cov_aleatoric = cfg_.constant_pos_cov_diag.asDiagonal();
      meas.pos_cov_epistemic.setZero();
      meas.pos_cov = meas.pos_cov_aleatoric;
      meas.rot_var_aleatoric = cfg_.constant_rot_var;
      meas.rot_var_epistemic = 0.0;
      meas.rot_var = cfg_.constant_rot_var;
    }
    // Gate against the IMU-propagated estimate of this keyframe, the
    // latest position estimate the backend has.
    summary.gate = gate(meas, states_.back().pose, cfg_.tau1, cfg_.tau2, cfg_.covariance_mode);
    const bool accept = !cfg_.rejection_enabled || summary.gate->accepted();
    if (accept) {
      AbsFactorData f;
      f.kf_id = kf_ids_.back();
      f.pos_sqrt_info = sqrt_info_from_cov<3>(meas.pos_cov);
      f.rot_inv_sigma = 1.0 / std::sqrt(std::max(meas.rot_var, 1e-12));
      f.meas = std::move(meas);
      abs_factors_.push_back(std::move(f));
      summary.abs_factor_added = true;
    }
  }

  summary.solve = optimize();

  if (cfg_.window_size > 0 && static_cast<int>(states_.size()) > cfg_.window_size) {
    drop_oldest();
  }

  summary.num_imu_factors = num_imu_factors();
  summary.num_reproj_factors = num_reprojection_factors();
  summary.num_abs_factors = num_absolute_pose_factors();
  summary.num_landmarks = static_cast<int>(solvable_landmark_ids().size());
  return summary;
}

void SlidingWindowGraph::try_initialize_landmarks() {
  for (auto& [id, lm] : landmarks_) {
    if (lm.initialized || lm.obs.size() < 2) continue;
    const LandmarkObs& first = lm.obs.front();
    const LandmarkObs& last = lm.obs.back();
    if (first.kf_id == last.kf_id) continue;
    const Posed& pose_a = states_[state_index(first.kf_id)].pose;
    const Posed& pose_b = states_[state_index(last.kf_id)].pose;
    Vec3d pt;
    try {
      pt = triangulate_two_view(pose_a, first.pixel, pose_b, last.pixel, cam_);
    } catch (const DegenerateInput&) {
      continue;
    }
    bool ok = true;
    for (const LandmarkObs* o : {&first, &last}) {
      const Posed& pose = states_[state_index(o->kf_id)].pose;
      const Vec3d pt_cam = cam_.body_to_camera.transform(pose.inverse().transform(pt));
      if (pt_cam.z() < cfg_.min_landmark_depth) {
        ok = false;
        break;
      }
      const Eigen::Vector2d proj(cam_.fx * pt_cam.x() / pt_cam.z() + cam_.cx,
                                 cam_.fy * pt_cam.y() / pt_cam.z() + cam_.cy);
      if ((proj - o->pixel).norm() > cfg_.max_triangulation_reproj_px) {
        ok = false;
        break;
      }
    }
    if (ok) {
      lm.position = pt;
      lm.initialized = true;
    }
  }
}

std::vector<int> SlidingWindowGraph::solvable_landmark_ids() const {
  std::vector<int> ids;
  for (const auto& [id, lm] : landmarks_) {
    if (lm.initialized && lm.obs.size() >= 2) ids.push_back(id);
  }
  return ids;
}

std::map<int, Vec3d> SlidingWindowGraph::landmark_positions() const {
  std::map<int, Vec3d> out;
  for (const auto& [id, lm] : landmarks_) {
    if (lm.initialized) out.emplace(id, lm.position);
  }
  return out;
}

int SlidingWindowGraph::num_reprojection_factors() const {
  int n = 0;
  for (const auto& [id, lm] : landmarks_) {
    if (lm.initialized && lm.obs.size() >= 2) n += static_cast<int>(lm.obs.size());
  }
  return n;
}

int SlidingWindowGraph::problem_dimension() const {
  return 15 * static_cast<int>(states_.size()) +
         3 * static_cast<int>(solvable_landmark_ids().size());
}

SlidingWindowGraph::Values SlidingWindowGraph::snapshot() const {
  Values v;
  v.states = states_;
  for (int id : solvable_landmark_ids()) v.lm_positions.push_back(landmarks_.at(id).position);
  return v;
}

void SlidingWindowGraph::restore(const Values& v) {
  states_ = v.states;
  const std::vector<int> ids = solvable_landmark_ids();
  for (std::size_t r = 0; r < ids.size(); ++r) landmarks_[ids[r]].position = v.lm_positions[r];
}

SlidingWindowGraph::Values SlidingWindowGraph::retracted(const Values& v,
                                                         const Eigen::VectorXd& delta) const {
  Values out = v;
  for (std::size_t i = 0; i < out.states.size(); ++i) {
    const int off = 15 * static_cast<int>(i);
    NavState& s = out.states[i];
    s.pose.rotation = exp_so3(Vec3d(delta.segment<3>(off))) * s.pose.rotation;
    s.pose.position += delta.segment<3>(off + 3);
    s.velocity += delta.segment<3>(off + 6);
    s.gyro_bias += delta.segment<3>(off + 9);
    s.accel_bias += delta.segment<3>(off + 12);
  }
  const int lm_base = 15 * static_cast<int>(out.states.size());
  for (std::size_t r = 0; r < out.lm_positions.size(); ++r) {
    out.lm_positions[r] += delta.segment<3>(lm_base + 3 * static_cast<int>(r));
  }
  return out;
}

void SlidingWindowGraph::apply_increment(const Eigen::VectorXd& delta) {
  restore(retracted(snapshot(), delta));
}

std::vector<bool> SlidingWindowGraph::active_reprojections(const Values& v) const {
  std::vector<bool> active;
  const std::vector<int> ids = solvable_landmark_ids();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const LandmarkData& lm = landmarks_.at(ids[r]);
    for (const LandmarkObs& o : lm.obs) {
      const NavState& s = v.states[state_index(o.kf_id)];
      const Vec3d pt_cam =
          cam_.body_to_camera.transform(s.pose.inverse().transform(v.lm_positions[r]));
      active.push_back(pt_cam.z() > 1e-6);
    }
  }
  return active;
}

double SlidingWindowGraph::cost_at(const Values& v, const std::vector<bool>& active) const {
  double cost = 0;
  for (const PriorFactorData& f : priors_) {
    cost += (f.sqrt_info * prior_residual(f.mean, v.states[state_index(f.kf_id)])).squaredNorm();
  }
  for (const ImuFactorData& f : imu_factors_) {
    const auto r = imu_residual(f.pre, v.states[state_index(f.kf_i)],
                                v.states[state_index(f.kf_j)], cfg_.gravity);
    cost += (f.sqrt_info * r).squaredNorm();
  }
  for (const BiasWalkFactorData& f : bias_factors_) {
    const NavState& si = v.states[state_index(f.kf_i)];
    const NavState& sj = v.states[state_index(f.kf_j)];
    Eigen::Matrix<double, 6, 1> r;
    r << sj.gyro_bias - si.gyro_bias, sj.accel_bias - si.accel_bias;
    cost += (f.inv_sigma.asDiagonal() * r).squaredNorm();
  }
  for (const AbsFactorData& f : abs_factors_) {
    const auto r = absolute_pose_residual(f.meas, v.states[state_index(f.kf_id)]);
    cost += (f.pos_sqrt_info * r.head<3>()).squaredNorm() +
            (f.rot_inv_sigma * r.tail<3>()).squaredNorm();
  }
  const double inv_px = 1.0 / cfg_.reproj_sigma_px;
  std::size_t slot = 0;
  const std::vector<int> ids = solvable_landmark_ids();
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const LandmarkData& lm = landmarks_.at(ids[r]);
    for (const LandmarkObs& o : lm.obs) {
      const bool was_active = active[slot++];
      if (!was_active) continue;
      const NavState& s = v.states[state_index(o.kf_id)];
      const auto res = reprojection_residual(o.pixel, s, v.lm_positions[r], cam_);
      if (!res) {
        cost += kDeactivatedPenalty;  // step pushed the point behind the camera
        continue;
      }
      cost += (inv_px * (*res)).squaredNorm();
    }
  }
  return cost;
}

double SlidingWindowGraph::current_cost() const {
  const Values v = snapshot();
  return cost_at(v, active_reprojections(v));
}

Eigen::VectorXd SlidingWindowGraph::whitened_residuals() const {
  const Values v = snapshot();
  const std::vector<int> ids = solvable_landmark_ids();
  const int rows = 15 * static_cast<int>(priors_.size()) +
                   9 * static_cast<int>(imu_factors_.size()) +
                   6 * static_cast<int>(bias_factors_.size()) +
                   6 * static_cast<int>(abs_factors_.size()) + 2 * num_reprojection_factors();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(rows);
  int row = 0;
  for (const PriorFactorData& f : priors_) {
    out.segment<15>(row) =
        f.sqrt_info * prior_residual(f.mean, v.states[state_index(f.kf_id)]);
    row += 15;
  }
  for (const ImuFactorData& f : imu_factors_) {
    out.segment<9>(row) = f.sqrt_info * imu_residual(f.pre, v.states[state_index(f.kf_i)],
                                                     v.states[state_index(f.kf_j)], cfg_.gravity);
    row += 9;
  }
  for (const BiasWalkFactorData& f : bias_factors_) {
    const NavState& si = v.states[state_index(f.kf_i)];
    const NavState& sj = v.states[state_index(f.kf_j)];
    Eigen::Matrix<double, 6, 1> r;
    r << sj.gyro_bias - si.gyro_bias, sj.accel_bias - si.accel_bias;
    out.segment<6>(row) = f.inv_sigma.asDiagonal() * r;
    row += 6;
  }
  for (const AbsFactorData& f : abs_factors_) {
    const auto r = absolute_pose_residual(f.meas, v.states[state_index(f.kf_id)]);
    out.segment<3>(row) = f.pos_sqrt_info * r.head<3>();
    out.segment<3>(row + 3) = f.rot_inv_sigma * r.tail<3>();
    row += 6;
  }
  const double inv_px = 1.0 / cfg_.reproj_sigma_px;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const LandmarkData& lm = landmarks_.at(ids[r]);
    for (const LandmarkObs& o : lm.obs) {
      const NavState& s = v.states[state_index(o.kf_id)];
      const auto res = reprojection_residual(o.pixel, s, v.lm_positions[r], cam_);
      if (res) out.segment<2>(row) = inv_px * (*res);
      row += 2;
    }
  }
  return out;
}

SlidingWindowGraph::Linearization SlidingWindowGraph::linearize(
    const Values& v, const std::vector<bool>& active) const {
  const int dim = problem_dimension();
  Linearization lin;
  lin.gradient = Eigen::VectorXd::Zero(dim);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(512 + 256 * states_.size() + 160 * num_reprojection_factors());

  // Scatters one factor's whitened (J, r): H += J^T J, g += J^T r.
  const auto scatter = [&](const Eigen::MatrixXd& jac, const Eigen::VectorXd& res,
                           const std::vector<std::pair<int, int>>& blocks) {
    lin.cost += res.squaredNorm();
    int col_a = 0;
    for (const auto& [off_a, width_a] : blocks) {
      lin.gradient.segment(off_a, width_a) +=
          jac.middleCols(col_a, width_a).transpose() * res;
      int col_b = 0;
      for (const auto& [off_b, width_b] : blocks) {
        const Eigen::MatrixXd h =
            jac.middleCols(col_a, width_a).transpose() * jac.middleCols(col_b, width_b);
        for (int i = 0; i < width_a; ++i) {
          for (int j = 0; j < width_b; ++j) {
            trips.emplace_back(off_a + i, off_b + j, h(i, j));
          }
        }
        col_b += width_b;
      }
      col_a += width_a;
    }
  };

  for (const PriorFactorData& f : priors_) {
    const int idx = state_index(f.kf_id);
    const NavState& s = v.states[idx];
    const Eigen::Matrix<double, 15, 1> r = prior_residual(f.mean, s);
    Eigen::Matrix<double, 15, 15> jac = Eigen::Matrix<double, 15, 15>::Identity();
    jac.block<3, 3>(0, 0) =
        left_jacobian_inv_so3(Vec3d(r.head<3>())) * f.mean.pose.rotation.transpose();
    scatter(f.sqrt_info * jac, f.sqrt_info * r, {{15 * idx, 15}});
  }

  for (const ImuFactorData& f : imu_factors_) {
    const int ii = state_index(f.kf_i);
    const int jj = state_index(f.kf_j);
    const ImuResidualJacobians rj =
        imu_residual_jacobians(f.pre, v.states[ii], v.states[jj], cfg_.gravity);
    Eigen::Matrix<double, 9, 30> jac;
    jac << rj.d_state_k, rj.d_state_k1;
    scatter(f.sqrt_info * jac, f.sqrt_info * rj.residual, {{15 * ii, 15}, {15 * jj, 15}});
  }

  for (const BiasWalkFactorData& f : bias_factors_) {
    const int ii = state_index(f.kf_i);
    const int jj = state_index(f.kf_j);
    const NavState& si = v.states[ii];
    const NavState& sj = v.states[jj];
    Eigen::Matrix<double, 6, 1> r;
    r << sj.gyro_bias - si.gyro_bias, sj.accel_bias - si.accel_bias;
    Eigen::Matrix<double, 6, 12> jac = Eigen::Matrix<double, 6, 12>::Zero();
    jac.leftCols<6>() = -Eigen::Matrix<double, 6, 6>::Identity();
    jac.rightCols<6>() = Eigen::Matrix<double, 6, 6>::Identity();
    scatter(f.inv_sigma.asDiagonal() * jac, f.inv_sigma.asDiagonal() * r,
            {{15 * ii + 9, 6}, {15 * jj + 9, 6}});
  }

  for (const AbsFactorData& f : abs_factors_) {
    const int idx = state_index(f.kf_id);
    const AbsolutePoseJacobians aj = absolute_pose_jacobians(f.meas, v.states[idx]);
    Eigen::Matrix<double, 6, 6> w = Eigen::Matrix<double, 6, 6>::Zero();
    w.topLeftCorner<3, 3>() = f.pos_sqrt_info;
    w.bottomRightCorner<3, 3>() = f.rot_inv_sigma * Mat3d::Identity();
    // residual rows are [pos; rot]; jacobian columns are [theta, p].
    Eigen::Matrix<double, 6, 6> jac;
    jac.topRows<3>() << Eigen::Matrix<double, 3, 3>::Zero(),
        Eigen::Matrix<double, 3, 3>::Identity();
    jac.bottomRows<3>() << aj.d_rotation.bottomRows<3>(), Eigen::Matrix<double, 3, 3>::Zero();
    scatter(w * jac, w * aj.residual, {{15 * idx, 6}});
  }

  const double inv_px = 1.0 / cfg_.reproj_sigma_px;
  const std::vector<int> ids = solvable_landmark_ids();
  const int lm_base = 15 * static_cast<int>(v.states.size());
  std::size_t slot = 0;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const LandmarkData& lm = landmarks_.at(ids[r]);
    for (const LandmarkObs& o : lm.obs) {
      const bool was_active = active[slot++];
      if (!was_active) continue;
      const int idx = state_index(o.kf_id);
      const auto rj = reprojection_jacobians(o.pixel, v.states[idx], v.lm_positions[r], cam_);
      if (!rj) continue;
      Eigen::Matrix<double, 2, 9> jac;
      jac << rj->d_rotation, rj->d_position, rj->d_landmark;
      scatter(inv_px * jac, inv_px * rj->residual,
              {{15 * idx, 3}, {15 * idx + 3, 3}, {lm_base + 3 * static_cast<int>(r), 3}});
    }
  }

  lin.hessian.resize(dim, dim);
  lin.hessian.setFromTriplets(trips.begin(), trips.end());
  return lin;
}

SolveStats SlidingWindowGraph::optimize() {
  SolveStats stats;
  if (states_.empty()) return stats;

  Values v = snapshot();
  std::vector<bool> active = active_reprojections(v);
  double cost = cost_at(v, active);
  stats.initial_cost = cost;
  stats.final_cost = cost;
  if (cost < 1e-18) return stats;

  const SolverSettings& set = cfg_.solver;
  double lambda = set.initial_lambda;
  stats.termination = SolveTermination::kMaxIterations;

  while (stats.iterations < set.max_iterations) {
    const Linearization lin = linearize(v, active);
    if (lin.gradient.lpNorm<Eigen::Infinity>() < set.gradient_tol) {
      stats.termination = SolveTermination::kSmallGradient;
      break;
    }

    const Eigen::VectorXd diag = lin.hessian.diagonal().cwiseMax(1e-12);
    bool accepted = false;
    bool factorized_once = false;
    bool done = false;
    while (lambda <= set.max_lambda) {
      Eigen::SparseMatrix<double> damped = lin.hessian;
      for (int i = 0; i < damped.rows(); ++i) damped.coeffRef(i, i) += lambda * diag[i];

      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(damped);
      if (ldlt.info() != Eigen::Success) {
        lambda *= set.lambda_increase;
        continue;
      }
      factorized_once = true;
      const Eigen::VectorXd delta = ldlt.solve(-lin.gradient);
      if (!delta.allFinite()) {
        lambda *= set.lambda_increase;
        continue;
      }
      if (delta.lpNorm<Eigen::Infinity>() < 1e-14) {
        stats.termination = SolveTermination::kConverged;
        done = true;
        break;
      }
      const Values candidate = retracted(v, delta);
      const double cand_cost = cost_at(candidate, active);
      if (cand_cost < cost) {
        const double decrease = cost - cand_cost;
        v = candidate;
        cost = cand_cost;
        ++stats.iterations;
        lambda = std::max(lambda * set.lambda_decrease, 1e-12);
        active = active_reprojections(v);
        accepted = true;
        if (decrease <= set.cost_decrease_tol * std::max(stats.final_cost, 1e-300)) {
          stats.termination = SolveTermination::kConverged;
          done = true;
        }
        stats.final_cost = cost;
        break;
      }
      lambda *= set.lambda_increase;
    }
    if (done) break;
    if (!accepted) {
      stats.termination = factorized_once ? SolveTermination::kNotConverged
                                          : SolveTermination::kIndefiniteSystem;
      break;
    }
  }

  restore(v);
  stats.final_cost = cost;
  return stats;
}

Eigen::Matrix<double, 15, 15> SlidingWindowGraph::marginal_state_covariance(
    int state_idx) const {
  const Values v = snapshot();
  const Linearization lin = linearize(v, active_reprojections(v));
  Eigen::SparseMatrix<double> h = lin.hessian;
  for (int i = 0; i < h.rows(); ++i) h.coeffRef(i, i) += kCovJitter;

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
  if (ldlt.info() == Eigen::Success) {
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(h.rows(), 15);
    for (int c = 0; c < 15; ++c) rhs(15 * state_idx + c, c) = 1.0;
    const Eigen::MatrixXd cols = ldlt.solve(rhs);
    Eigen::Matrix<double, 15, 15> cov = cols.middleRows(15 * state_idx, 15);
    cov = 0.5 * (cov + cov.transpose()).eval();
    Eigen::LLT<Eigen::Matrix<double, 15, 15>> llt(cov);
    if (llt.info() == Eigen::Success) return cov;
  }
  // Fallback: loose diagonal prior; keeps the run alive when the window
  // information matrix is numerically unusable.
  Eigen::Matrix<double, 15, 15> cov = Eigen::Matrix<double, 15, 15>::Identity();
  cov.diagonal().segment<3>(0).setConstant(0.25);
  cov.diagonal().segment<3>(3).setConstant(1.0);
  cov.diagonal().segment<3>(6).setConstant(1.0);
  cov.diagonal().segment<3>(9).setConstant(0.01);
  cov.diagonal().segment<3>(12).setConstant(0.1);
  return cov;
}

void SlidingWindowGraph::drop_oldest() {
  if (states_.size() < 2) return;
  const int dropped = kf_ids_.front();
  const int new_oldest = kf_ids_[1];

  PriorFactorData new_prior;
  new_prior.kf_id = new_oldest;
  new_prior.mean = states_[1];
  new_prior.sqrt_info = sqrt_info_from_cov<15>(marginal_state_covariance(1));

  std::erase_if(priors_, [&](const PriorFactorData& f) { return f.kf_id == dropped; });
  std::erase_if(imu_factors_,
                [&](const ImuFactorData& f) { return f.kf_i == dropped || f.kf_j == dropped; });
  std::erase_if(bias_factors_, [&](const BiasWalkFactorData& f) {
    return f.kf_i == dropped || f.kf_j == dropped;
  });
  std::erase_if(abs_factors_, [&](const AbsFactorData& f) { return f.kf_id == dropped; });

  for (auto it = landmarks_.begin(); it != landmarks_.end();) {
    LandmarkData& lm = it->second;
    std::erase_if(lm.obs, [&](const LandmarkObs& o) { return o.kf_id == dropped; });
    const bool dead = lm.obs.empty() || (lm.initialized && lm.obs.size() < 2);
    it = dead ? landmarks_.erase(it) : std::next(it);
  }

  states_.erase(states_.begin());
  kf_ids_.erase(kf_ids_.begin());
  priors_.push_back(std::move(new_prior));
}

}  // namespace apvio
